use proptest::prelude::*;
use serde_json::{json, Value};

use trafficmcp_server::error::{
    INVALID_PARAMS, INVALID_REQUEST, METHOD_NOT_FOUND, PARSE_ERROR, TOOL_FAILED, TOOL_NOT_IMPORTED,
    UNKNOWN_MODULE,
};
use trafficmcp_server::osm_client::OsmClient;
use trafficmcp_server::rpc::{Outcome, RpcError, RpcId, RpcRequest, RpcResponse, PROTOCOL_VERSION};
use trafficmcp_server::transport::serve_io;
use trafficmcp_server::{Context, Server};

fn server() -> (tempfile::TempDir, Server) {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::new(Context::new(dir.path(), OsmClient::offline()));
    (dir, s)
}

fn request(s: &mut Server, id: i64, method: &str, params: Value) -> Value {
    let line = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params}).to_string();
    serde_json::from_str(&s.handle_line(&line).expect("reply")).unwrap()
}

fn tool_call(s: &mut Server, id: i64, name: &str, args: Value) -> Value {
    request(
        s,
        id,
        "tools/call",
        json!({"name": name, "arguments": args}),
    )
}

#[test]
fn error_table() {
    let (_d, mut s) = server();
    let parse: Value = serde_json::from_str(&s.handle_line("{\"jsonrpc\":").unwrap()).unwrap();
    assert_eq!(parse["error"]["code"], PARSE_ERROR);

    assert_eq!(
        request(&mut s, 1, "tools/nope", json!({}))["error"]["code"],
        METHOD_NOT_FOUND
    );

    let r = tool_call(&mut s, 2, "import_module", json!({"names": "network"}));
    assert_eq!(r["error"]["code"], INVALID_PARAMS);
    assert_eq!(r["error"]["data"]["param"], "names");

    let r = tool_call(&mut s, 3, "generate_grid", json!({"rows": 3, "cols": 3}));
    assert_eq!(r["error"]["code"], TOOL_NOT_IMPORTED);
    assert_eq!(r["error"]["data"]["module"], "network");
    assert_eq!(r["error"]["data"]["hint"], "import_module first");

    let r = tool_call(
        &mut s,
        4,
        "import_module",
        json!({"names": ["visualization"]}),
    );
    assert_eq!(r["error"]["code"], UNKNOWN_MODULE);

    tool_call(&mut s, 5, "import_module", json!({"names": ["network"]}));
    let r = tool_call(&mut s, 6, "generate_grid", json!({"rows": 0, "cols": 3}));
    assert_eq!(r["error"]["code"], INVALID_PARAMS);
    assert_eq!(r["error"]["data"]["param"], "rows");
    let r = tool_call(
        &mut s,
        7,
        "convert_osm",
        json!({"osm": "<osm version=\"0.6\"></osm>"}),
    );
    assert_eq!(r["error"]["code"], TOOL_FAILED);
    assert_eq!(r["error"]["data"]["retryable"], false);

    assert_eq!(
        request(&mut s, 8, "tools/call", json!({"name": "no_such_tool"}))["error"]["code"],
        METHOD_NOT_FOUND
    );

    let r = request(&mut s, 9, "initialize", json!({}));
    assert_eq!(r["result"]["protocolVersion"], PROTOCOL_VERSION);
}

#[test]
fn stream_is_answered_in_order() {
    let (_d, mut s) = server();
    let input = [
        r#"{"jsonrpc":"2.0","id":1,"method":"initialize","params":{}}"#,
        r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#,
        r#"{"jsonrpc":"2.0","id":2,"method":"tools/list"}"#,
        r#"{"jsonrpc":"2.0","id":3,"method":"tools/call","params":{"name":"import_module","arguments":{"names":["network"]}}}"#,
        r#"{"jsonrpc":"2.0","id":4,"method":"tools/call","params":{"name":"generate_grid","arguments":{"rows":2,"cols":2}}}"#,
    ]
    .join("\r\n");
    let mut out = Vec::new();
    serve_io(&mut s, input.as_bytes(), &mut out).unwrap();
    let replies: Vec<Value> = std::str::from_utf8(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<i64> = replies.iter().map(|r| r["id"].as_i64().unwrap()).collect();
    assert_eq!(ids, [1, 2, 3, 4]);
    assert_eq!(replies[1]["result"]["tools"].as_array().unwrap().len(), 4);
    assert_eq!(replies[3]["result"]["nodes"].as_array().unwrap().len(), 4);
}

/// A mix of valid and malformed messages, with the id each one carries.
fn message() -> impl Strategy<Value = (String, Option<Value>)> {
    let id = prop_oneof![
        (0i64..1000).prop_map(|n| json!(n)),
        "[a-z]{1,6}".prop_map(|s| json!(s)),
    ];
    let method = prop_oneof![
        Just("ping".to_string()),
        Just("tools/list".to_string()),
        Just("initialize".to_string()),
        Just("tools/call".to_string()),
        "[a-z/]{1,10}",
    ];
    let params = prop_oneof![
        Just(Value::Null),
        Just(json!({})),
        Just(json!({"name": "import_module", "arguments": {"names": ["route"]}})),
        Just(json!({"name": "random_trips", "arguments": {"count": 3}})),
        Just(json!({"name": "get_module_description"})),
        Just(json!({"name": 5})),
        Just(json!([1, 2])),
        Just(json!("str")),
    ];
    prop_oneof![
        3 => (id, method, params).prop_map(|(id, m, p)| {
            let mut msg = json!({"jsonrpc": "2.0", "id": id, "method": m});
            if !p.is_null() {
                msg["params"] = p;
            }
            (msg.to_string(), Some(id))
        }),
        1 => "[ -~]{0,20}".prop_map(|junk| (junk, None)),
        1 => Just((r#"{"jsonrpc":"2.0","method":"ping"}"#.to_string(), None)),
        1 => (0i64..100).prop_map(|n| (json!({"jsonrpc": "1.0", "id": n, "method": "ping"}).to_string(), Some(json!(n)))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_id_gets_one_reply_with_one_outcome(msgs in prop::collection::vec(message(), 1..20)) {
        let (_d, mut s) = server();
        for (line, id) in msgs {
            if line.trim().is_empty() {
                continue;
            }
            let reply = s.handle_line(&line);
            match (&id, reply) {
                (Some(id), Some(r)) => {
                    let v: Value = serde_json::from_str(&r).unwrap();
                    prop_assert_eq!(&v["id"], id);
                    prop_assert!(v.get("result").is_some() != v.get("error").is_some());
                    prop_assert!(!r.contains('\n'));
                }
                (Some(_), None) => prop_assert!(false, "no reply to {}", line),
                (None, Some(r)) => {
                    let v: Value = serde_json::from_str(&r).unwrap();
                    prop_assert!(v.get("result").is_some() != v.get("error").is_some());
                    prop_assert_eq!(&v["id"], &Value::Null);
                }
                (None, None) => {}
            }
        }
    }

    #[test]
    fn messages_roundtrip(n in any::<i64>(), s in "\\PC{0,12}", method in "[a-z/]{1,12}", code in -32768i64..-32000, num in any::<bool>()) {
        let id = if num { RpcId::Num(n) } else { RpcId::Str(s.clone()) };
        let req = RpcRequest::new(Some(id.clone()), &method, json!({"k": s}));
        let back: RpcRequest = serde_json::from_str(&serde_json::to_string(&req).unwrap()).unwrap();
        prop_assert_eq!(back, req);

        let resp = RpcResponse::result(Some(id.clone()), json!({"v": n}));
        prop_assert_eq!(serde_json::from_str::<RpcResponse>(&resp.to_line()).unwrap(), resp);
        let err = RpcResponse {
            jsonrpc: "2.0".into(),
            id: Some(id),
            outcome: Outcome::Error(RpcError { code, message: method, data: Some(json!({"retryable": num})) }),
        };
        prop_assert_eq!(serde_json::from_str::<RpcResponse>(&err.to_line()).unwrap(), err);
    }
}

#[test]
fn invalid_requests_keep_their_id() {
    let (_d, mut s) = server();
    let r: Value = serde_json::from_str(
        &s.handle_line(r#"{"jsonrpc":"2.0","id":12,"method":""}"#)
            .unwrap(),
    )
    .unwrap();
    assert_eq!(r["id"], 12);
    assert_eq!(r["error"]["code"], INVALID_REQUEST);
}
