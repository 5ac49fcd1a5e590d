//! OpenAPI description of the HTTP service.

use serde_json::{json, Value};

fn error_response(description: &str) -> Value {
    json!({
        "description": description,
        "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } }
    })
}

fn ok(schema: &str) -> Value {
    json!({
        "description": "OK",
        "content": { "application/json": { "schema": { "$ref": format!("#/components/schemas/{schema}") } } }
    })
}

fn id_param() -> Value {
    json!({ "name": "id", "in": "path", "required": true, "schema": { "type": "string", "description": "ULID" } })
}

pub fn document() -> Value {
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "OPA workbench",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Elicitation sessions, OPA / OPA-PR / OPA-PRS solves and benchmark correlations."
        },
        "paths": {
            "/api/sessions": {
                "post": {
                    "summary": "Start an elicitation session",
                    "requestBody": { "required": true, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/CreateSession" } } } },
                    "responses": { "201": ok("Session"), "400": error_response("Invalid configuration") }
                }
            },
            "/api/sessions/{id}": {
                "get": {
                    "summary": "Stored session record, replayable with `opa elicit --replay`",
                    "parameters": [id_param()],
                    "responses": { "200": { "description": "OK" }, "404": error_response("Unknown id") }
                }
            },
            "/api/sessions/{id}/question": {
                "get": {
                    "summary": "Pending question, drawing a new one if none is pending",
                    "parameters": [id_param()],
                    "responses": { "200": ok("Question"), "404": error_response("Unknown id"), "409": error_response("Session complete or inconsistent") }
                },
                "post": {
                    "summary": "Pose a caller-chosen triple",
                    "parameters": [id_param()],
                    "requestBody": { "required": true, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Pose" } } } },
                    "responses": { "200": ok("Question"), "400": error_response("Invalid triple"), "404": error_response("Unknown id"), "409": error_response("A question is pending") }
                }
            },
            "/api/sessions/{id}/answer": {
                "post": {
                    "summary": "Answer the pending question",
                    "parameters": [id_param()],
                    "requestBody": { "required": true, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/AnswerRequest" } } } },
                    "responses": { "200": ok("Session"), "404": error_response("Unknown id"), "409": error_response("No pending question") }
                }
            },
            "/api/sessions/{id}/band": {
                "get": {
                    "summary": "Pointwise utility envelope",
                    "parameters": [id_param()],
                    "responses": { "200": ok("Band"), "404": error_response("Unknown id") }
                }
            },
            "/api/solve/{model}": {
                "post": {
                    "summary": "Solve an instance document",
                    "parameters": [
                        { "name": "model", "in": "path", "required": true, "schema": { "type": "string", "enum": ["opa", "opa-pr", "opa-prs"] } },
                        { "name": "alpha", "in": "query", "required": false, "schema": { "type": "number", "minimum": 0, "maximum": 1 } },
                        { "name": "lp_check", "in": "query", "required": false, "schema": { "type": "boolean" } }
                    ],
                    "requestBody": { "required": true, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Instance" } } } },
                    "responses": {
                        "200": ok("SolveResponse"),
                        "400": error_response("Parse or schema error"),
                        "500": error_response("Solver fault")
                    }
                }
            },
            "/api/results/{id}": {
                "get": {
                    "summary": "Stored result document",
                    "parameters": [id_param()],
                    "responses": { "200": ok("Result"), "404": error_response("Unknown id") }
                }
            },
            "/api/bench/heatmap": {
                "get": {
                    "summary": "Spearman correlations between published benchmark rankings",
                    "parameters": [{ "name": "methods", "in": "query", "required": false, "schema": { "type": "string" }, "description": "Comma-separated subset" }],
                    "responses": { "200": ok("Heatmap"), "404": error_response("Unknown method") }
                }
            },
            "/api/spec": {
                "get": { "summary": "This document", "responses": { "200": { "description": "OK" } } }
            }
        },
        "components": {
            "schemas": {
                "Error": {
                    "type": "object",
                    "properties": {
                        "error": {
                            "type": "object",
                            "required": ["code", "message"],
                            "properties": {
                                "code": { "type": "string" },
                                "message": { "type": "string" },
                                "violations": {
                                    "type": "array",
                                    "items": { "type": "object", "properties": { "pointer": { "type": "string" }, "message": { "type": "string" } } }
                                }
                            }
                        }
                    }
                },
                "CreateSession": {
                    "type": "object",
                    "required": ["R", "G", "L", "seed"],
                    "properties": {
                        "R": { "type": "integer", "minimum": 2 },
                        "G": { "type": "number", "exclusiveMinimum": 0 },
                        "L": { "type": "integer", "minimum": 0 },
                        "seed": { "type": "integer", "minimum": 0 }
                    }
                },
                "Session": {
                    "type": "object",
                    "properties": {
                        "id": { "type": "string" },
                        "R": { "type": "integer" },
                        "G": { "type": "number" },
                        "L": { "type": "integer" },
                        "seed": { "type": "integer" },
                        "status": { "type": "string", "enum": ["ACTIVE", "COMPLETE", "INCONSISTENT"] },
                        "budget_warning": { "type": "boolean" },
                        "asked": { "type": "array", "items": { "type": "object" } },
                        "pending": { "nullable": true, "allOf": [{ "$ref": "#/components/schemas/Question" }] }
                    }
                },
                "Question": {
                    "type": "object",
                    "properties": {
                        "index": { "type": "integer" },
                        "r1": { "type": "integer" },
                        "r2": { "type": "integer" },
                        "r3": { "type": "integer" },
                        "p": { "type": "number" },
                        "c_lo": { "type": "number" },
                        "c_hi": { "type": "number" },
                        "slope_cap": { "type": "number", "nullable": true },
                        "forced": { "type": "boolean" }
                    }
                },
                "Pose": {
                    "type": "object",
                    "required": ["r1", "r2", "r3"],
                    "properties": {
                        "r1": { "type": "integer" },
                        "r2": { "type": "integer" },
                        "r3": { "type": "integer" },
                        "p": { "type": "number" }
                    }
                },
                "AnswerRequest": {
                    "type": "object",
                    "required": ["answer"],
                    "properties": { "answer": { "type": "string", "enum": ["PREFERS_LOTTERY", "PREFERS_CERTAIN"] } }
                },
                "Band": {
                    "type": "object",
                    "properties": {
                        "grid": { "type": "array", "items": { "type": "number" } },
                        "band": { "type": "array", "items": { "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 } },
                        "status": { "type": "string" }
                    }
                },
                "Instance": {
                    "type": "object",
                    "required": ["schema_version", "t", "s", "r"],
                    "properties": {
                        "schema_version": { "type": "integer", "enum": [1] },
                        "t": { "type": "array", "items": { "type": "integer" } },
                        "s": { "type": "array", "items": { "type": "array", "items": { "type": "integer" } } },
                        "r": { "type": "array", "items": { "type": "array", "items": { "type": "array", "items": { "type": "integer" } } } },
                        "s_intervals": { "type": "array" },
                        "t_intervals": { "type": "array" },
                        "alpha": { "type": "number" },
                        "lipschitz": { "type": "number" },
                        "utilities": { "type": "array" },
                        "scenarios": { "type": "array" },
                        "inconsistency": { "type": "object" }
                    }
                },
                "Result": {
                    "type": "object",
                    "required": ["schema_version", "model", "z", "weights", "aggregates", "provenance"],
                    "properties": {
                        "schema_version": { "type": "integer" },
                        "model": { "type": "string" },
                        "z": { "type": "number" },
                        "weights": { "type": "array" },
                        "aggregates": {
                            "type": "object",
                            "properties": {
                                "expert": { "type": "array", "items": { "type": "number" } },
                                "attribute": { "type": "array", "items": { "type": "number" } },
                                "alternative": { "type": "array", "items": { "type": "number" } }
                            }
                        },
                        "worst_case_utilities": { "type": "array" },
                        "fragility": { "type": "object" },
                        "inconsistency": { "type": "object" },
                        "provenance": { "type": "object" }
                    }
                },
                "SolveResponse": {
                    "type": "object",
                    "properties": { "id": { "type": "string" }, "result": { "$ref": "#/components/schemas/Result" } }
                },
                "Heatmap": {
                    "type": "object",
                    "properties": {
                        "methods": { "type": "array", "items": { "type": "string" } },
                        "values": { "type": "array", "items": { "type": "array", "items": { "type": "number" } } }
                    }
                }
            }
        }
    })
}
