use std::collections::HashMap;
use std::convert::Infallible;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Path, Query, State};
use axum::http::header::{CONTENT_TYPE, LOCATION};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::{Stream, StreamExt};
use mfrs_core::memo::{write_wav, MemoMeta};
use mfrs_core::store::{NewPerson, PersonPatch, PersonRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorCode};
use crate::{AppState, DEFAULT_SESSION, SESSION_HEADER};

type Params = Query<HashMap<String, String>>;

fn body(raw: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    raw.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(ErrorCode::PayloadTooLarge, e.body_text())
        } else {
            ApiError::new(ErrorCode::BadRequest, e.body_text())
        }
    })
}

fn json_body<T: DeserializeOwned>(raw: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let bytes = body(raw)?;
    serde_json::from_slice(&bytes).map_err(|e| ApiError::new(ErrorCode::BadRequest, format!("invalid JSON body: {e}")))
}

fn id(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::new(ErrorCode::BadRequest, format!("{raw:?} is not a valid id")))
}

fn param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match params.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| ApiError::new(ErrorCode::BadRequest, format!("invalid {key}: {v:?}"))),
    }
}

fn session(headers: &HeaderMap) -> String {
    headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .unwrap_or(DEFAULT_SESSION)
        .to_string()
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, format!("worker failed: {e}")))?
}

fn created<T: Serialize>(location: String, value: T) -> Response {
    (StatusCode::CREATED, [(LOCATION, location)], Json(value)).into_response()
}

pub async fn create_person(
    State(s): State<AppState>,
    raw: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let new: NewPerson = json_body(raw)?;
    let person = s.engine.store.create_person(new)?;
    Ok(created(format!("/api/persons/{}", person.person_id), person))
}

pub async fn list_persons(State(s): State<AppState>) -> Json<Vec<PersonRecord>> {
    Json(s.engine.store.list_persons())
}

pub async fn get_person(State(s): State<AppState>, Path(raw): Path<String>) -> Result<Json<PersonRecord>, ApiError> {
    Ok(Json(s.engine.store.get_person(id(&raw)?)?))
}

pub async fn update_person(
    State(s): State<AppState>,
    Path(raw): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<PersonRecord>, ApiError> {
    let person_id = id(&raw)?;
    let patch: PersonPatch = json_body(body)?;
    Ok(Json(s.engine.store.update_person(person_id, patch)?))
}

pub async fn delete_person(State(s): State<AppState>, Path(raw): Path<String>) -> Result<StatusCode, ApiError> {
    s.engine.store.delete_person(id(&raw)?)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageAdded {
    pub encoding_id: u64,
    pub image_id: Option<u64>,
    pub framing: mfrs_core::ingestion::FramingReport,
}

pub async fn add_image(
    State(s): State<AppState>,
    Path(raw): Path<String>,
    Query(params): Params,
    headers: HeaderMap,
    raw_body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let person_id = id(&raw)?;
    let override_framing = param::<bool>(&params, "override_framing")?.unwrap_or(false);
    let bytes = body(raw_body)?;
    let session = session(&headers);
    let engine = s.engine.clone();
    let sessions = s.sessions.clone();
    let (record, framing) = blocking(move || {
        let mut ctx = sessions.get(&session);
        let out = engine.enroll_image(person_id, &bytes, override_framing, &mut ctx)?;
        sessions.enrolled(&session, person_id, out.0.created_at);
        Ok(out)
    })
    .await?;
    Ok(created(
        format!("/api/persons/{person_id}"),
        ImageAdded {
            encoding_id: record.encoding_id,
            image_id: record.source_image,
            framing,
        },
    ))
}

pub async fn profile(
    State(s): State<AppState>,
    Path(raw): Path<String>,
) -> Result<Json<mfrs_core::retrieval::Profile>, ApiError> {
    Ok(Json(s.engine.profile(id(&raw)?)?))
}

pub async fn get_image(State(s): State<AppState>, Path(raw): Path<String>) -> Result<Response, ApiError> {
    let image = s.engine.store.get_image(id(&raw)?)?;
    let content_type = if image.bytes.starts_with(b"\x89PNG") {
        "image/png"
    } else {
        "image/x-portable-anymap"
    };
    Ok(([(CONTENT_TYPE, content_type)], image.bytes).into_response())
}

pub async fn recognize(State(s): State<AppState>, raw: Result<Bytes, BytesRejection>) -> Result<Response, ApiError> {
    let bytes = body(raw)?;
    let engine = s.engine.clone();
    let outcome = blocking(move || Ok(engine.recognize(&bytes)?)).await?;
    s.events.publish(outcome.clone());
    Ok(Json(outcome).into_response())
}

pub async fn add_memo(
    State(s): State<AppState>,
    Query(params): Params,
    headers: HeaderMap,
    raw: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let person_id = param::<u64>(&params, "person_id")?;
    let label = params.get("label").cloned().unwrap_or_default();
    let bytes = body(raw)?;
    let ctx = s.sessions.get(&session(&headers));
    let engine = s.engine.clone();
    let meta = blocking(move || Ok(engine.add_memo_wav(&bytes, person_id, &label, &ctx)?)).await?;
    Ok(created(format!("/api/memos/{}", meta.memo_id), meta))
}

pub async fn list_memos(State(s): State<AppState>, Query(params): Params) -> Result<Json<Vec<MemoMeta>>, ApiError> {
    let person_id = param::<u64>(&params, "person_id")?;
    let unlinked = param::<bool>(&params, "unlinked")?.unwrap_or(false);
    let store = &s.engine.store;
    Ok(Json(match (person_id, unlinked) {
        (Some(_), true) => {
            return Err(ApiError::new(ErrorCode::BadRequest, "person_id and unlinked are exclusive"));
        }
        (Some(p), false) => store.memos_for(p)?,
        (None, true) => store.unlinked_memos(),
        (None, false) => store.read().memos().map(|m| m.meta()).collect(),
    }))
}

pub async fn get_memo(State(s): State<AppState>, Path(raw): Path<String>) -> Result<Json<MemoMeta>, ApiError> {
    Ok(Json(s.engine.store.get_memo(id(&raw)?)?.meta()))
}

pub async fn delete_memo(State(s): State<AppState>, Path(raw): Path<String>) -> Result<StatusCode, ApiError> {
    s.engine.store.delete_memo(id(&raw)?)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRequest {
    pub person_id: u64,
}

pub async fn link_memo(
    State(s): State<AppState>,
    Path(raw): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<MemoMeta>, ApiError> {
    let memo_id = id(&raw)?;
    let req: LinkRequest = json_body(body)?;
    Ok(Json(s.engine.store.link_memo(memo_id, req.person_id)?))
}

pub async fn memo_audio(State(s): State<AppState>, Path(raw): Path<String>) -> Result<Response, ApiError> {
    let memo = s.engine.store.get_memo(id(&raw)?)?;
    Ok(([(CONTENT_TYPE, "audio/wav")], write_wav(&memo.clip)).into_response())
}

pub async fn events(
    State(s): State<AppState>,
    Query(params): Params,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let header = headers
        .get("last-event-id")
        .map(|v| v.to_str().unwrap_or("").trim().to_string());
    let after = match header.or_else(|| params.get("last_event_id").cloned()) {
        None => None,
        Some(v) => Some(id(&v)?),
    };
    let stream = s.events.clone().stream(after).map(|e| {
        let event = Event::default()
            .id(e.event_id.to_string())
            .event("recognition")
            .json_data(&*e)
            .unwrap_or_else(|_| Event::default().comment("unserializable event"));
        Ok(event)
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub async fn public_config(State(s): State<AppState>) -> Json<crate::PublicConfig> {
    Json(s.public.clone())
}

pub async fn schema() -> Response {
    ([(CONTENT_TYPE, "application/schema+json")], crate::API_SCHEMA).into_response()
}

pub async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(ErrorCode::MethodNotAllowed, "method not allowed for this endpoint")
}
