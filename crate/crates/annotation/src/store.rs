//! SQLite-backed state. Every operation takes the acting annotator and
//! enforces the authorization rules itself, so the HTTP layer cannot skip a
//! check.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use aloe_core::data::{span_id, validate_instance, Alignment, GoldInstance, Role, Span, TargetObserverPair, ValidationReport};
use rusqlite::{params, Connection, OptionalExtension, Transaction};

use crate::model::*;

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS annotators (
    annotator_id TEXT PRIMARY KEY,
    role TEXT NOT NULL,
    token TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS pairs (
    pair_id TEXT PRIMARY KEY,
    body TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS batches (
    batch_id INTEGER PRIMARY KEY AUTOINCREMENT,
    phase TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tasks (
    task_id TEXT PRIMARY KEY,
    pair_id TEXT NOT NULL REFERENCES pairs(pair_id),
    phase TEXT NOT NULL,
    batch_id INTEGER NOT NULL REFERENCES batches(batch_id),
    UNIQUE (pair_id, phase)
);
CREATE TABLE IF NOT EXISTS assignments (
    task_id TEXT NOT NULL REFERENCES tasks(task_id),
    annotator_id TEXT NOT NULL REFERENCES annotators(annotator_id),
    status TEXT NOT NULL,
    PRIMARY KEY (task_id, annotator_id)
);
CREATE TABLE IF NOT EXISTS submissions (
    task_id TEXT NOT NULL REFERENCES tasks(task_id),
    annotator_id TEXT NOT NULL REFERENCES annotators(annotator_id),
    revision INTEGER NOT NULL,
    payload TEXT NOT NULL,
    submitted_at INTEGER NOT NULL,
    PRIMARY KEY (task_id, annotator_id, revision)
);
CREATE TABLE IF NOT EXISTS adjudications (
    task_id TEXT PRIMARY KEY REFERENCES tasks(task_id),
    payload TEXT NOT NULL,
    adjudicator_id TEXT NOT NULL,
    source TEXT NOT NULL,
    selected_annotator TEXT,
    finalized_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS entries (
    entry_id INTEGER PRIMARY KEY AUTOINCREMENT,
    task_id TEXT NOT NULL REFERENCES tasks(task_id),
    kind TEXT NOT NULL,
    author TEXT NOT NULL,
    text TEXT NOT NULL,
    created_at INTEGER NOT NULL
);
CREATE TRIGGER IF NOT EXISTS submissions_no_update BEFORE UPDATE ON submissions
BEGIN SELECT RAISE(ABORT, 'submissions are append-only'); END;
CREATE TRIGGER IF NOT EXISTS submissions_no_delete BEFORE DELETE ON submissions
BEGIN SELECT RAISE(ABORT, 'submissions are append-only'); END;
CREATE TRIGGER IF NOT EXISTS adjudications_no_update BEFORE UPDATE ON adjudications
BEGIN SELECT RAISE(ABORT, 'finalized tasks are immutable'); END;
CREATE TRIGGER IF NOT EXISTS adjudications_no_delete BEFORE DELETE ON adjudications
BEGIN SELECT RAISE(ABORT, 'finalized tasks are immutable'); END;
"#;

/// Which thread an entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Thread {
    /// Private to the author (and admins).
    Notes,
    /// Shared by all assignees.
    Discussion,
}

impl Thread {
    fn as_str(self) -> &'static str {
        match self {
            Thread::Notes => "note",
            Thread::Discussion => "discussion",
        }
    }
}

struct Inner {
    conn: Connection,
    /// Last issued timestamp; every new one is strictly larger.
    last_ts: i64,
}

impl Inner {
    fn tick(&mut self) -> i64 {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as i64).unwrap_or(0);
        self.last_ts = now.max(self.last_ts + 1);
        self.last_ts
    }
}

pub struct Store {
    inner: Mutex<Inner>,
}

type Result<T> = std::result::Result<T, ServiceError>;

fn require_admin(actor: &Annotator) -> Result<()> {
    match actor.role {
        AnnotatorRole::Admin => Ok(()),
        AnnotatorRole::Annotator => Err(ServiceError::Forbidden("admin role required".into())),
    }
}

fn is_admin(actor: &Annotator) -> bool {
    actor.role == AnnotatorRole::Admin
}

fn parse_col<T: std::str::FromStr<Err = String>>(s: String) -> Result<T> {
    s.parse().map_err(|e: String| ServiceError::BadRequest(format!("corrupt store value: {e}")))
}

struct TaskRow {
    pair_id: String,
    phase: Phase,
    batch_id: i64,
}

fn task_row(tx: &Connection, task_id: &str) -> Result<TaskRow> {
    tx.query_row("SELECT pair_id, phase, batch_id FROM tasks WHERE task_id = ?1", [task_id], |r| {
        Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, i64>(2)?))
    })
    .optional()?
    .ok_or_else(|| ServiceError::NotFound(format!("task {task_id}")))
    .and_then(|(pair_id, phase, batch_id)| Ok(TaskRow { pair_id, phase: parse_col(phase)?, batch_id }))
}

fn load_pair(tx: &Connection, pair_id: &str) -> Result<TargetObserverPair> {
    let body: String = tx
        .query_row("SELECT body FROM pairs WHERE pair_id = ?1", [pair_id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| ServiceError::NotFound(format!("pair {pair_id}")))?;
    Ok(serde_json::from_str(&body)?)
}

fn assignment_status(tx: &Connection, task_id: &str, annotator: &str) -> Result<Option<TaskStatus>> {
    tx.query_row("SELECT status FROM assignments WHERE task_id = ?1 AND annotator_id = ?2", [task_id, annotator], |r| {
        r.get::<_, String>(0)
    })
    .optional()?
    .map(parse_col)
    .transpose()
}

fn set_status(tx: &Connection, task_id: &str, annotator: &str, status: TaskStatus) -> Result<()> {
    tx.execute(
        "UPDATE assignments SET status = ?3 WHERE task_id = ?1 AND annotator_id = ?2",
        params![task_id, annotator, status.as_str()],
    )?;
    Ok(())
}

fn final_payload(tx: &Connection, task_id: &str) -> Result<Option<(String, String)>> {
    Ok(tx
        .query_row("SELECT payload, adjudicator_id FROM adjudications WHERE task_id = ?1", [task_id], |r| {
            Ok((r.get(0)?, r.get(1)?))
        })
        .optional()?)
}

fn final_spans(tx: &Connection, pair_id: &str) -> Result<Option<Vec<Span>>> {
    match final_payload(tx, &Phase::Spans.task_id(pair_id))? {
        Some((text, _)) => match serde_json::from_str(&text)? {
            Payload::Spans(spans) => Ok(Some(spans)),
            Payload::Alignments(_) => Err(ServiceError::BadRequest("phase-1 decision holds alignments".into())),
        },
        None => Ok(None),
    }
}

fn instance(pair: TargetObserverPair, spans: Vec<Span>, alignments: Vec<Alignment>) -> GoldInstance {
    GoldInstance { pair, spans, alignments, adjudicated_by: String::new(), phase1_batch: 0 }
}

/// Fills empty span ids with canonical ones and checks the payload against
/// the task's texts (and, for alignments, its finalized spans).
fn checked_payload(tx: &Connection, task: &TaskRow, payload: Payload) -> Result<Payload> {
    if payload.phase() != task.phase {
        return Err(ServiceError::BadRequest(format!("{} payload sent to a {} task", payload.phase(), task.phase)));
    }
    let pair = load_pair(tx, &task.pair_id)?;
    let report = match payload {
        Payload::Spans(mut spans) => {
            let mut next = BTreeMap::from([(Role::Target, 0usize), (Role::Observer, 0usize)]);
            for s in &mut spans {
                let ord = next.get_mut(&s.role).expect("both roles");
                if s.span_id.is_empty() {
                    s.span_id = span_id(&pair.pair_id, s.role, *ord);
                }
                *ord += 1;
            }
            let report = validate_instance(&instance(pair, spans.clone(), vec![]));
            if report.is_valid() {
                return Ok(Payload::Spans(spans));
            }
            report
        }
        Payload::Alignments(alignments) => {
            let spans = final_spans(tx, &task.pair_id)?
                .ok_or_else(|| ServiceError::Conflict("phase-1 spans are not finalized".into()))?;
            let report = validate_instance(&instance(pair, spans, alignments.clone()));
            if report.is_valid() {
                return Ok(Payload::Alignments(alignments));
            }
            report
        }
    };
    Err(ServiceError::Invalid(report))
}

fn latest_submission(tx: &Connection, task_id: &str, annotator: &str) -> Result<Option<(i64, String, i64)>> {
    Ok(tx
        .query_row(
            "SELECT revision, payload, submitted_at FROM submissions WHERE task_id = ?1 AND annotator_id = ?2
             ORDER BY revision DESC LIMIT 1",
            [task_id, annotator],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
        )
        .optional()?)
}

impl Store {
    pub fn open(path: &Path) -> Result<Self> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.pragma_update(None, "busy_timeout", 5000)?;
        conn.execute_batch(SCHEMA)?;
        let last_ts: i64 = conn.query_row(
            "SELECT MAX(COALESCE((SELECT MAX(created_at) FROM entries), 0),
                        COALESCE((SELECT MAX(submitted_at) FROM submissions), 0),
                        COALESCE((SELECT MAX(finalized_at) FROM adjudications), 0))",
            [],
            |r| r.get(0),
        )?;
        Ok(Store { inner: Mutex::new(Inner { conn, last_ts }) })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn write<T>(&self, f: impl FnOnce(&Transaction<'_>, &mut i64) -> Result<T>) -> Result<T> {
        let mut inner = self.lock();
        let mut ts = inner.tick();
        let tx = inner.conn.transaction()?;
        let out = f(&tx, &mut ts)?;
        tx.commit()?;
        inner.last_ts = inner.last_ts.max(ts);
        Ok(out)
    }

    /// Creates the admin account if no admin exists yet. Returns the issued
    /// token, or `None` when an admin was already present.
    pub fn ensure_admin(&self, annotator_id: &str, token: Option<&str>) -> Result<Option<IssuedToken>> {
        self.write(|tx, _| {
            let admins: i64 = tx.query_row("SELECT COUNT(*) FROM annotators WHERE role = 'admin'", [], |r| r.get(0))?;
            if admins > 0 {
                return Ok(None);
            }
            let token = token.map(String::from).unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
            tx.execute("INSERT INTO annotators (annotator_id, role, token) VALUES (?1, 'admin', ?2)", [annotator_id, &token])?;
            Ok(Some(IssuedToken { annotator_id: annotator_id.into(), role: AnnotatorRole::Admin, token }))
        })
    }

    pub fn authenticate(&self, token: &str) -> Result<Annotator> {
        let inner = self.lock();
        let row = inner
            .conn
            .query_row("SELECT annotator_id, role FROM annotators WHERE token = ?1", [token], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?))
            })
            .optional()?;
        let (annotator_id, role) = row.ok_or(ServiceError::Unauthorized)?;
        Ok(Annotator { annotator_id, role: parse_col(role)? })
    }

    pub fn create_annotator(&self, actor: &Annotator, req: &CreateAnnotator) -> Result<IssuedToken> {
        require_admin(actor)?;
        let id = req.annotator_id.trim();
        if id.is_empty() {
            return Err(ServiceError::BadRequest("annotator_id is empty".into()));
        }
        self.write(|tx, _| {
            let exists: bool =
                tx.query_row("SELECT EXISTS(SELECT 1 FROM annotators WHERE annotator_id = ?1)", [id], |r| r.get(0))?;
            if exists {
                return Err(ServiceError::Conflict(format!("annotator {id} exists")));
            }
            let token = uuid::Uuid::new_v4().simple().to_string();
            tx.execute(
                "INSERT INTO annotators (annotator_id, role, token) VALUES (?1, ?2, ?3)",
                params![id, req.role.as_str(), token],
            )?;
            Ok(IssuedToken { annotator_id: id.into(), role: req.role, token })
        })
    }

    /// Loads pairs for annotation. Re-posting an identical pair is a no-op;
    /// a different pair under an existing id is a conflict. Returns the
    /// number of new pairs.
    pub fn add_pairs(&self, actor: &Annotator, pairs: &[TargetObserverPair]) -> Result<usize> {
        require_admin(actor)?;
        for p in pairs {
            let report = validate_instance(&instance(p.clone(), vec![], vec![]));
            if !report.is_valid() {
                return Err(ServiceError::Invalid(report));
            }
        }
        self.write(|tx, _| {
            let mut added = 0;
            for p in pairs {
                let body = serde_json::to_string(p)?;
                let existing: Option<String> =
                    tx.query_row("SELECT body FROM pairs WHERE pair_id = ?1", [&p.pair_id], |r| r.get(0)).optional()?;
                match existing {
                    Some(old) if old == body => {}
                    Some(_) => return Err(ServiceError::Conflict(format!("pair {} exists with different content", p.pair_id))),
                    None => {
                        tx.execute("INSERT INTO pairs (pair_id, body) VALUES (?1, ?2)", [&p.pair_id, &body])?;
                        added += 1;
                    }
                }
            }
            Ok(added)
        })
    }

    /// Splits `pair_ids` into batches of at most `size` tasks and assigns
    /// every task to every listed annotator. All or nothing.
    pub fn create_batch(&self, actor: &Annotator, req: &CreateBatch) -> Result<Vec<Batch>> {
        require_admin(actor)?;
        if req.size == 0 {
            return Err(ServiceError::BadRequest("batch size must be positive".into()));
        }
        if req.pair_ids.is_empty() || req.annotator_ids.is_empty() {
            return Err(ServiceError::BadRequest("need at least one pair and one annotator".into()));
        }
        let unique: BTreeSet<&String> = req.pair_ids.iter().collect();
        if unique.len() != req.pair_ids.len() {
            return Err(ServiceError::BadRequest("pair listed twice".into()));
        }
        let annotators: Vec<String> = req.annotator_ids.iter().collect::<BTreeSet<_>>().into_iter().cloned().collect();
        self.write(|tx, _| {
            for a in &annotators {
                let known: bool =
                    tx.query_row("SELECT EXISTS(SELECT 1 FROM annotators WHERE annotator_id = ?1)", [a], |r| r.get(0))?;
                if !known {
                    return Err(ServiceError::NotFound(format!("annotator {a}")));
                }
            }
            for p in &req.pair_ids {
                load_pair(tx, p)?;
                let task_id = req.phase.task_id(p);
                let batched: bool =
                    tx.query_row("SELECT EXISTS(SELECT 1 FROM tasks WHERE task_id = ?1)", [&task_id], |r| r.get(0))?;
                if batched {
                    return Err(ServiceError::Conflict(format!("pair {p} is already batched for {}", req.phase)));
                }
                if req.phase == Phase::Alignment && final_spans(tx, p)?.is_none() {
                    return Err(ServiceError::Conflict(format!("pair {p} has no finalized phase-1 spans")));
                }
            }
            let mut out = Vec::new();
            for chunk in req.pair_ids.chunks(req.size) {
                tx.execute("INSERT INTO batches (phase) VALUES (?1)", [req.phase.as_str()])?;
                let batch_id = tx.last_insert_rowid();
                let mut task_ids = Vec::new();
                for p in chunk {
                    let task_id = req.phase.task_id(p);
                    tx.execute(
                        "INSERT INTO tasks (task_id, pair_id, phase, batch_id) VALUES (?1, ?2, ?3, ?4)",
                        params![task_id, p, req.phase.as_str(), batch_id],
                    )?;
                    for a in &annotators {
                        tx.execute(
                            "INSERT INTO assignments (task_id, annotator_id, status) VALUES (?1, ?2, ?3)",
                            params![task_id, a, TaskStatus::Unstarted.as_str()],
                        )?;
                    }
                    task_ids.push(task_id);
                }
                out.push(Batch { batch_id, phase: req.phase, task_ids, annotators: annotators.clone() });
            }
            Ok(out)
        })
    }

    /// Tasks assigned to `annotator` (the actor by default). Only admins may
    /// list someone else's tasks; an admin without `annotator` gets every
    /// task with the least advanced status among its assignees.
    pub fn list_tasks(&self, actor: &Annotator, annotator: Option<&str>) -> Result<Vec<TaskSummary>> {
        let who = match annotator {
            Some(a) if a != actor.annotator_id => {
                require_admin(actor)?;
                Some(a)
            }
            Some(a) => Some(a),
            None if is_admin(actor) => None,
            None => Some(actor.annotator_id.as_str()),
        };
        let inner = self.lock();
        let mut stmt = inner.conn.prepare(
            "SELECT t.task_id, t.pair_id, t.phase, t.batch_id, a.status, EXISTS(SELECT 1 FROM adjudications j WHERE j.task_id = t.task_id)
             FROM tasks t JOIN assignments a ON a.task_id = t.task_id
             WHERE ?1 IS NULL OR a.annotator_id = ?1
             ORDER BY t.batch_id, t.task_id",
        )?;
        let rows = stmt.query_map([who], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, i64>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, bool>(5)?,
            ))
        })?;
        let mut out: Vec<TaskSummary> = Vec::new();
        for row in rows {
            let (task_id, pair_id, phase, batch_id, status, finalized) = row?;
            let status: TaskStatus = parse_col(status)?;
            match out.last_mut() {
                Some(last) if last.task_id == task_id => last.status = last.status.min(status),
                _ => out.push(TaskSummary { task_id, pair_id, phase: parse_col(phase)?, batch_id, status, finalized }),
            }
        }
        Ok(out)
    }

    /// Opens a task. An assignee's first view moves their status to
    /// in-progress.
    pub fn get_task(&self, actor: &Annotator, task_id: &str) -> Result<AnnotationTask> {
        self.write(|tx, _| {
            let task = task_row(tx, task_id)?;
            let own = assignment_status(tx, task_id, &actor.annotator_id)?;
            if own.is_none() && !is_admin(actor) {
                return Err(ServiceError::Forbidden(format!("task {task_id} is not assigned to {}", actor.annotator_id)));
            }
            if own == Some(TaskStatus::Unstarted) {
                set_status(tx, task_id, &actor.annotator_id, TaskStatus::InProgress)?;
            }
            let mut status = BTreeMap::new();
            let mut stmt = tx.prepare("SELECT annotator_id, status FROM assignments WHERE task_id = ?1 ORDER BY annotator_id")?;
            for row in stmt.query_map([task_id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))? {
                let (a, s) = row?;
                if is_admin(actor) || a == actor.annotator_id {
                    status.insert(a, parse_col(s)?);
                }
            }
            let reference_spans = match task.phase {
                Phase::Spans => Vec::new(),
                Phase::Alignment => final_spans(tx, &task.pair_id)?.unwrap_or_default(),
            };
            Ok(AnnotationTask {
                task_id: task_id.into(),
                pair: load_pair(tx, &task.pair_id)?,
                phase: task.phase,
                batch_id: task.batch_id,
                status,
                finalized: final_payload(tx, task_id)?.is_some(),
                reference_spans,
            })
        })
    }

    /// Stores a new revision of the actor's annotation for the task.
    pub fn submit(&self, actor: &Annotator, task_id: &str, payload: Payload) -> Result<Submission> {
        self.write(|tx, ts| {
            let task = task_row(tx, task_id)?;
            if assignment_status(tx, task_id, &actor.annotator_id)?.is_none() {
                return Err(ServiceError::Forbidden(format!("task {task_id} is not assigned to {}", actor.annotator_id)));
            }
            if final_payload(tx, task_id)?.is_some() {
                return Err(ServiceError::Conflict(format!("task {task_id} is finalized")));
            }
            let payload = checked_payload(tx, &task, payload)?;
            let revision = latest_submission(tx, task_id, &actor.annotator_id)?.map_or(1, |(r, _, _)| r + 1);
            tx.execute(
                "INSERT INTO submissions (task_id, annotator_id, revision, payload, submitted_at) VALUES (?1, ?2, ?3, ?4, ?5)",
                params![task_id, actor.annotator_id, revision, serde_json::to_string(&payload)?, *ts],
            )?;
            set_status(tx, task_id, &actor.annotator_id, TaskStatus::Submitted)?;
            Ok(Submission {
                annotator_id: actor.annotator_id.clone(),
                task_id: task_id.into(),
                revision,
                payload,
                submitted_at: *ts,
            })
        })
    }

    /// Full revision history of one annotator on a task, oldest first.
    /// Visible to that annotator and to admins.
    pub fn submissions(&self, actor: &Annotator, task_id: &str, annotator: &str) -> Result<Vec<Submission>> {
        if annotator != actor.annotator_id {
            require_admin(actor)?;
        }
        let inner = self.lock();
        task_row(&inner.conn, task_id)?;
        let mut stmt = inner.conn.prepare(
            "SELECT revision, payload, submitted_at FROM submissions WHERE task_id = ?1 AND annotator_id = ?2 ORDER BY revision",
        )?;
        let rows =
            stmt.query_map([task_id, annotator], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?, r.get::<_, i64>(2)?)))?;
        let mut out = Vec::new();
        for row in rows {
            let (revision, payload, submitted_at) = row?;
            out.push(Submission {
                annotator_id: annotator.into(),
                task_id: task_id.into(),
                revision,
                payload: serde_json::from_str(&payload)?,
                submitted_at,
            });
        }
        Ok(out)
    }

    pub fn add_entry(&self, actor: &Annotator, task_id: &str, thread: Thread, text: &str) -> Result<Entry> {
        if text.trim().is_empty() {
            return Err(ServiceError::BadRequest("empty text".into()));
        }
        self.write(|tx, ts| {
            task_row(tx, task_id)?;
            if !is_admin(actor) && assignment_status(tx, task_id, &actor.annotator_id)?.is_none() {
                return Err(ServiceError::Forbidden(format!("task {task_id} is not assigned to {}", actor.annotator_id)));
            }
            tx.execute(
                "INSERT INTO entries (task_id, kind, author, text, created_at) VALUES (?1, ?2, ?3, ?4, ?5)",
                params![task_id, thread.as_str(), actor.annotator_id, text, *ts],
            )?;
            Ok(Entry {
                entry_id: tx.last_insert_rowid(),
                task_id: task_id.into(),
                author: actor.annotator_id.clone(),
                text: text.into(),
                created_at: *ts,
            })
        })
    }

    /// Discussion: everything, for assignees and admins. Notes: the actor's
    /// own; admins may read anyone's (all authors when `author` is None).
    pub fn entries(&self, actor: &Annotator, task_id: &str, thread: Thread, author: Option<&str>) -> Result<Vec<Entry>> {
        let inner = self.lock();
        let conn = &inner.conn;
        task_row(conn, task_id)?;
        if !is_admin(actor) && assignment_status(conn, task_id, &actor.annotator_id)?.is_none() {
            return Err(ServiceError::Forbidden(format!("task {task_id} is not assigned to {}", actor.annotator_id)));
        }
        let author = match (thread, author) {
            (Thread::Discussion, a) => a,
            (Thread::Notes, Some(a)) if a != actor.annotator_id && !is_admin(actor) => {
                return Err(ServiceError::Forbidden("notes are private to their author".into()));
            }
            (Thread::Notes, Some(a)) => Some(a),
            (Thread::Notes, None) if is_admin(actor) => None,
            (Thread::Notes, None) => Some(actor.annotator_id.as_str()),
        };
        let mut stmt = conn.prepare(
            "SELECT entry_id, author, text, created_at FROM entries
             WHERE task_id = ?1 AND kind = ?2 AND (?3 IS NULL OR author = ?3) ORDER BY created_at, entry_id",
        )?;
        let rows = stmt.query_map(params![task_id, thread.as_str(), author], |r| {
            Ok(Entry { entry_id: r.get(0)?, task_id: task_id.into(), author: r.get(1)?, text: r.get(2)?, created_at: r.get(3)? })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Latest revision of every annotator plus the discussion. Assignees see
    /// it only after their own first submission.
    pub fn review(&self, actor: &Annotator, task_id: &str) -> Result<ReviewView> {
        let columns = self.write(|tx, _| {
            task_row(tx, task_id)?;
            if !is_admin(actor) {
                match assignment_status(tx, task_id, &actor.annotator_id)? {
                    None => return Err(ServiceError::Forbidden(format!("task {task_id} is not assigned to {}", actor.annotator_id))),
                    Some(_) if latest_submission(tx, task_id, &actor.annotator_id)?.is_none() => {
                        return Err(ServiceError::Forbidden("submit your own annotation before reviewing others".into()));
                    }
                    Some(_) => set_status(tx, task_id, &actor.annotator_id, TaskStatus::Reviewed)?,
                }
            }
            let mut stmt = tx.prepare(
                "SELECT s.annotator_id, s.revision, s.payload, s.submitted_at FROM submissions s
                 WHERE s.task_id = ?1 AND s.revision = (SELECT MAX(revision) FROM submissions x WHERE x.task_id = s.task_id AND x.annotator_id = s.annotator_id)
                 ORDER BY s.annotator_id",
            )?;
            let rows = stmt.query_map([task_id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)?, r.get::<_, String>(2)?, r.get::<_, i64>(3)?)))?;
            let mut cols = Vec::new();
            for row in rows {
                let (annotator_id, revision, payload, submitted_at) = row?;
                cols.push(Submission { annotator_id, task_id: task_id.into(), revision, payload: serde_json::from_str(&payload)?, submitted_at });
            }
            Ok(cols)
        })?;
        let discussion = self.entries(actor, task_id, Thread::Discussion, None)?;
        Ok(ReviewView { task_id: task_id.into(), columns, discussion })
    }

    /// Records the final annotation. Compare-and-set: exactly one of several
    /// concurrent calls succeeds, the rest get a conflict.
    pub fn finalize(&self, actor: &Annotator, task_id: &str, resolution: Resolution) -> Result<AdjudicationState> {
        require_admin(actor)?;
        self.write(|tx, ts| {
            let task = task_row(tx, task_id)?;
            let (payload_text, source, selected) = match resolution {
                Resolution::Select(annotator) => {
                    let (_, text, _) = latest_submission(tx, task_id, &annotator)?
                        .ok_or_else(|| ServiceError::NotFound(format!("no submission from {annotator} on {task_id}")))?;
                    (text, AdjudicationSource::SelectedFromAnnotator, Some(annotator))
                }
                Resolution::Edited(payload) => {
                    let payload = checked_payload(tx, &task, payload)?;
                    (serde_json::to_string(&payload)?, AdjudicationSource::AdminEdited, None)
                }
            };
            let inserted = tx.execute(
                "INSERT OR IGNORE INTO adjudications (task_id, payload, adjudicator_id, source, selected_annotator, finalized_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![task_id, payload_text, actor.annotator_id, source.as_str(), selected, *ts],
            )?;
            if inserted == 0 {
                return Err(ServiceError::Conflict(format!("task {task_id} is already finalized")));
            }
            Ok(AdjudicationState {
                task_id: task_id.into(),
                finalized: true,
                final_payload: Some(serde_json::from_str(&payload_text)?),
                adjudicator_id: Some(actor.annotator_id.clone()),
                source: Some(source),
                selected_annotator: selected,
                finalized_at: Some(*ts),
            })
        })
    }

    pub fn adjudication(&self, actor: &Annotator, task_id: &str) -> Result<AdjudicationState> {
        let inner = self.lock();
        let conn = &inner.conn;
        task_row(conn, task_id)?;
        if !is_admin(actor) && assignment_status(conn, task_id, &actor.annotator_id)?.is_none() {
            return Err(ServiceError::Forbidden(format!("task {task_id} is not assigned to {}", actor.annotator_id)));
        }
        let row = conn
            .query_row(
                "SELECT payload, adjudicator_id, source, selected_annotator, finalized_at FROM adjudications WHERE task_id = ?1",
                [task_id],
                |r| {
                    Ok((
                        r.get::<_, String>(0)?,
                        r.get::<_, String>(1)?,
                        r.get::<_, String>(2)?,
                        r.get::<_, Option<String>>(3)?,
                        r.get::<_, i64>(4)?,
                    ))
                },
            )
            .optional()?;
        Ok(match row {
            None => AdjudicationState {
                task_id: task_id.into(),
                finalized: false,
                final_payload: None,
                adjudicator_id: None,
                source: None,
                selected_annotator: None,
                finalized_at: None,
            },
            Some((payload, adjudicator, source, selected, at)) => AdjudicationState {
                task_id: task_id.into(),
                finalized: true,
                final_payload: Some(serde_json::from_str(&payload)?),
                adjudicator_id: Some(adjudicator),
                source: Some(if source == "admin-edited" {
                    AdjudicationSource::AdminEdited
                } else {
                    AdjudicationSource::SelectedFromAnnotator
                }),
                selected_annotator: selected,
                finalized_at: Some(at),
            },
        })
    }

    /// Gold instances for every pair in `batch` (all batched pairs when
    /// None), as JSONL sorted by pair id. Both phases must be finalized.
    pub fn export(&self, actor: &Annotator, batch: Option<i64>) -> Result<String> {
        require_admin(actor)?;
        let inner = self.lock();
        let conn = &inner.conn;
        if let Some(b) = batch {
            let exists: bool = conn.query_row("SELECT EXISTS(SELECT 1 FROM batches WHERE batch_id = ?1)", [b], |r| r.get(0))?;
            if !exists {
                return Err(ServiceError::NotFound(format!("batch {b}")));
            }
        }
        let mut stmt = conn.prepare("SELECT DISTINCT pair_id FROM tasks WHERE ?1 IS NULL OR batch_id = ?1 ORDER BY pair_id")?;
        let pair_ids: Vec<String> = stmt.query_map([batch], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
        let mut missing = Vec::new();
        let mut out = String::new();
        for pair_id in &pair_ids {
            let spans = final_spans(conn, pair_id)?;
            let align = final_payload(conn, &Phase::Alignment.task_id(pair_id))?;
            if spans.is_none() {
                missing.push(Phase::Spans.task_id(pair_id));
            }
            if align.is_none() {
                missing.push(Phase::Alignment.task_id(pair_id));
            }
            let (Some(spans), Some((align_text, adjudicator))) = (spans, align) else { continue };
            let Payload::Alignments(mut alignments) = serde_json::from_str(&align_text)? else {
                return Err(ServiceError::BadRequest(format!("phase-2 decision for {pair_id} holds spans")));
            };
            alignments.sort();
            let phase1_batch = task_row(conn, &Phase::Spans.task_id(pair_id))?.batch_id;
            let gold =
                GoldInstance { pair: load_pair(conn, pair_id)?, spans, alignments, adjudicated_by: adjudicator, phase1_batch };
            let report: ValidationReport = validate_instance(&gold);
            if !report.is_valid() {
                return Err(ServiceError::Invalid(report));
            }
            out.push_str(&serde_json::to_string(&gold)?);
            out.push('\n');
        }
        if !missing.is_empty() {
            return Err(ServiceError::Unfinalized(missing));
        }
        Ok(out)
    }
}
