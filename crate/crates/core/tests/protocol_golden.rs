use std::path::PathBuf;

use reqgrid::backend::{EmbedRequest, EmbedResponse, ErrorBody, Normalize, ScoreRequest, ScoreResponse};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/protocol").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn round_trip<T: Serialize + DeserializeOwned>(name: &str) -> T {
    let text = golden(name);
    let parsed: T = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&parsed).unwrap(), text.trim_end(), "{name}");
    parsed
}

#[test]
fn messages_round_trip() {
    let req: ScoreRequest = round_trip("score_request.json");
    assert_eq!(req.normalize, Normalize::MeanLogProb);
    req.validate().unwrap();
    let qa: ScoreRequest = round_trip("score_request_qa.json");
    assert_eq!(qa.normalize, Normalize::SumLogProb);
    let resp: ScoreResponse = round_trip("score_response.json");
    resp.check_against(&req).unwrap();
    assert!(resp.check_against(&qa).is_err());

    let embed: EmbedRequest = round_trip("embed_request.json");
    embed.validate().unwrap();
    let vectors: EmbedResponse = round_trip("embed_response.json");
    vectors.check_against(&embed.texts).unwrap();
    let err: ErrorBody = round_trip("error.json");
    assert!(err.error.contains("continuations"));
}

#[test]
fn malformed_messages_are_rejected() {
    assert!(serde_json::from_str::<ScoreRequest>(r#"{"context":"c","continuations":["x"],"normalize":"max"}"#).is_err());
    let empty: ScoreRequest = serde_json::from_str(r#"{"context":"c","continuations":[],"normalize":"mean"}"#).unwrap();
    assert!(empty.validate().is_err());
    let blank = EmbedRequest { texts: vec!["ok".into(), "".into()] };
    assert!(blank.validate().is_err());
}
