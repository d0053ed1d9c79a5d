//! Dual scoring: the Key Answer Score over the assistant-side dialogue and
//! the Database Score over the final world state, plus aggregation into
//! per-family reports and the Fleiss-kappa utility for annotation studies.
//!
//! The deterministic fallback judges are specifications in their own right;
//! with them the whole evaluation is a pure function of (transcript, final
//! snapshot, task). A remote judge plugs in behind the same trait with a
//! digest-keyed cache so re-runs stay stable.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{ChatMessage, CompletionRequest, ModelBackend};
use crate::episode::{Termination, Transcript};
use crate::rules::TaskFamily;
use crate::world::{diff, DiffKind, FieldDiff, StateSnapshot};

// ---------------------------------------------------------------------------
// Judge contract
// ---------------------------------------------------------------------------

/// Binary decisions over (message, key answer) and (remark, remark).
pub trait Judge: Send + Sync {
    /// Does this assistant message convey the key answer? Amounts and
    /// times must match exactly.
    fn key_answer_present(&self, message: &str, key_answer: &str) -> bool;

    /// Are two remark texts equivalent? Brand names must match exactly.
    fn remarks_equivalent(&self, remark: &str, ground_truth: &str) -> bool;

    /// Whether this judge is the deterministic fallback (flagged in records).
    fn is_fallback(&self) -> bool {
        false
    }
}

/// Normalize text for containment checks: lowercase, strip punctuation
/// except the characters that carry meaning inside numbers and times.
fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric() || matches!(c, '.' | ':' | '-' | '/'))
                .collect::<String>()
        })
        .map(|w| {
            w.trim_matches(|c| matches!(c, '.' | ':' | '-' | '/'))
                .to_string()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// The deterministic judge: normalized token containment with exact
/// numeric/time-string equality (numbers survive normalization verbatim,
/// so containment of a numeric token is exact match).
pub struct FallbackJudge {
    brand_vocab: BTreeSet<String>,
}

impl FallbackJudge {
    pub fn new(brand_vocab: impl IntoIterator<Item = String>) -> FallbackJudge {
        FallbackJudge {
            brand_vocab: brand_vocab.into_iter().collect(),
        }
    }

    /// Brand vocabulary from a world's tariff table.
    pub fn for_world(data: &crate::world::WorldData) -> FallbackJudge {
        FallbackJudge::new(data.brand_tariffs.keys().cloned())
    }

    fn brand_mentions(&self, toks: &[String]) -> BTreeSet<String> {
        toks.iter()
            .filter_map(|t| {
                self.brand_vocab
                    .iter()
                    .find(|b| b.to_lowercase() == *t)
                    .cloned()
            })
            .collect()
    }
}

impl Judge for FallbackJudge {
    fn key_answer_present(&self, message: &str, key_answer: &str) -> bool {
        let msg: BTreeSet<String> = tokens(message).into_iter().collect();
        tokens(key_answer).iter().all(|t| msg.contains(t))
    }

    fn remarks_equivalent(&self, remark: &str, ground_truth: &str) -> bool {
        let a = tokens(remark);
        let b = tokens(ground_truth);
        if self.brand_mentions(&a) != self.brand_mentions(&b) {
            return false;
        }
        let sa: BTreeSet<&String> = a.iter().collect();
        let sb: BTreeSet<&String> = b.iter().collect();
        sa.is_subset(&sb) || sb.is_subset(&sa)
    }

    fn is_fallback(&self) -> bool {
        true
    }
}

/// A judge served by a chat-completion backend, asked to answer 1 or 0.
/// Decisions are cached by input digest; any backend failure or
/// unparseable verdict falls back to the deterministic judge.
pub struct RemoteJudge {
    backend: Arc<dyn ModelBackend>,
    seed: u64,
    fallback: FallbackJudge,
    cache: Mutex<BTreeMap<String, bool>>,
}

impl RemoteJudge {
    pub fn new(backend: Arc<dyn ModelBackend>, seed: u64, fallback: FallbackJudge) -> RemoteJudge {
        RemoteJudge {
            backend,
            seed,
            fallback,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    fn decide(&self, cache_key: &str, system: &str, prompt: String, fallback: bool) -> bool {
        if let Some(&hit) = self.cache.lock().expect("lock").get(cache_key) {
            return hit;
        }
        let request = CompletionRequest {
            system: system.to_string(),
            messages: vec![ChatMessage::user(prompt)],
            seed: self.seed,
        };
        let verdict = match self.backend.complete(&request) {
            Ok(text) => match text.trim() {
                "1" => Some(true),
                "0" => Some(false),
                _ => None,
            },
            Err(_) => None,
        };
        let decision = verdict.unwrap_or(fallback);
        self.cache
            .lock()
            .expect("lock")
            .insert(cache_key.to_string(), decision);
        decision
    }
}

impl Judge for RemoteJudge {
    fn key_answer_present(&self, message: &str, key_answer: &str) -> bool {
        let key = digest(&format!("ka\u{1}{message}\u{1}{key_answer}"));
        let prompt = format!(
            "You will see a message from a conversation between an e-commerce customer-service \
             representative and a customer, and a key answer.\n\n[Start of message]\n{message}\n\
             [End of message]\n\n[Start of key_answer]\n{key_answer}\n[End of key_answer]\n\n\
             Does the message contain the content of the key_answer? Amounts and times must \
             match exactly. Reply with 1 or 0 only."
        );
        self.decide(
            &key,
            "You judge whether a customer-service message conveys a required key answer.",
            prompt,
            self.fallback.key_answer_present(message, key_answer),
        )
    }

    fn remarks_equivalent(&self, remark: &str, ground_truth: &str) -> bool {
        let key = digest(&format!("rm\u{1}{remark}\u{1}{ground_truth}"));
        let prompt = format!(
            "You will see two messages.\n\n[Start of message1]\n{remark}\n[End of message1]\n\n\
             [Start of message2]\n{ground_truth}\n[End of message2]\n\nAre the two messages \
             similar in content? Express delivery brands and similar identifiers must be \
             completely consistent. Reply with 1 or 0 only."
        );
        self.decide(
            &key,
            "You judge whether two order remarks are equivalent.",
            prompt,
            self.fallback.remarks_equivalent(remark, ground_truth),
        )
    }
}

pub fn digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let out = hasher.finalize();
    hex(&out[..8])
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

/// 1 iff every key answer is present in some assistant-side message.
/// Returns the missing keys for triage. An empty key list is vacuously 1.
pub fn key_answer_score(
    transcript: &Transcript,
    key_answers: &[String],
    judge: &dyn Judge,
) -> (bool, Vec<String>) {
    let messages: Vec<&str> = transcript.assistant_messages().collect();
    let missing: Vec<String> = key_answers
        .iter()
        .filter(|k| !messages.iter().any(|m| judge.key_answer_present(m, k)))
        .cloned()
        .collect();
    (missing.is_empty(), missing)
}

/// 1 iff the final state equals the ground truth: every non-remark field
/// byte-equal, remark lists pairwise equivalent under the judge. All diffs
/// are returned for triage.
pub fn database_score(
    final_snapshot: &StateSnapshot,
    ground_truth: &StateSnapshot,
    judge: &dyn Judge,
) -> (bool, Vec<FieldDiff>) {
    let diffs = diff(final_snapshot, ground_truth);
    let ok = diffs.iter().all(|d| match d.kind {
        DiffKind::Exact => false,
        DiffKind::Semantic => remarks_match(&d.old, &d.new, judge),
    });
    (ok, diffs)
}

fn remarks_match(a: &serde_json::Value, b: &serde_json::Value, judge: &dyn Judge) -> bool {
    let (Some(xs), Some(ys)) = (a.as_array(), b.as_array()) else {
        return false;
    };
    xs.len() == ys.len()
        && xs
            .iter()
            .zip(ys)
            .all(|(x, y)| match (x.as_str(), y.as_str()) {
                (Some(x), Some(y)) => judge.remarks_equivalent(x, y),
                _ => false,
            })
}

/// One scored task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub task_id: String,
    pub family: TaskFamily,
    pub ka: bool,
    pub db: bool,
    pub score: bool,
    pub missing_keys: Vec<String>,
    pub diffs: Vec<FieldDiff>,
    pub tool_calls: u32,
    pub termination: Termination,
    pub fallback_judge: bool,
}

impl ScoreRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        task_id: &str,
        family: TaskFamily,
        transcript: &Transcript,
        final_snapshot: &StateSnapshot,
        ground_truth: &StateSnapshot,
        key_answers: &[String],
        tool_calls: u32,
        termination: Termination,
        judge: &dyn Judge,
    ) -> ScoreRecord {
        let (ka, missing_keys) = key_answer_score(transcript, key_answers, judge);
        let (db, diffs) = database_score(final_snapshot, ground_truth, judge);
        ScoreRecord {
            task_id: task_id.to_string(),
            family,
            ka,
            db,
            score: ka && db,
            missing_keys,
            diffs,
            tool_calls,
            termination,
            fallback_judge: judge.is_fallback(),
        }
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub count: usize,
    pub ka_pct: Option<f64>,
    pub db_pct: Option<f64>,
    pub score_pct: Option<f64>,
    pub mean_tool_calls: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub per_family: BTreeMap<TaskFamily, FamilyStats>,
    pub total: FamilyStats,
    pub terminations: BTreeMap<String, usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("no records to aggregate")]
    Empty,
    #[error("fewer than 2 raters")]
    TooFewRaters,
    #[error("ratings matrix is ragged or empty")]
    BadMatrix,
}

fn pct(hits: usize, total: usize) -> Option<f64> {
    if total == 0 {
        None
    } else {
        Some(round1(100.0 * hits as f64 / total as f64))
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn stats_for(records: &[&ScoreRecord]) -> FamilyStats {
    let n = records.len();
    FamilyStats {
        count: n,
        ka_pct: pct(records.iter().filter(|r| r.ka).count(), n),
        db_pct: pct(records.iter().filter(|r| r.db).count(), n),
        score_pct: pct(records.iter().filter(|r| r.score).count(), n),
        mean_tool_calls: if n == 0 {
            None
        } else {
            Some(round1(
                records.iter().map(|r| r.tool_calls as f64).sum::<f64>() / n as f64,
            ))
        },
    }
}

/// Per-family and total percentages at one decimal place, plus tool-call
/// and termination statistics.
pub fn aggregate(records: &[ScoreRecord]) -> Result<Report, ScoreError> {
    if records.is_empty() {
        return Err(ScoreError::Empty);
    }
    let mut per_family = BTreeMap::new();
    for family in TaskFamily::ALL {
        let bucket: Vec<&ScoreRecord> = records.iter().filter(|r| r.family == family).collect();
        per_family.insert(family, stats_for(&bucket));
    }
    let total = stats_for(&records.iter().collect::<Vec<_>>());
    let mut terminations = BTreeMap::new();
    for r in records {
        let key = serde_json::to_value(r.termination)
            .expect("termination serializes")
            .as_str()
            .expect("termination is a string")
            .to_string();
        *terminations.entry(key).or_insert(0) += 1;
    }
    Ok(Report {
        per_family,
        total,
        terminations,
    })
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "-".to_string(),
    }
}

/// Aligned text table rendering of a report ("-" for empty buckets).
pub fn render_report(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>7} {:>7} {:>7} {:>10}\n",
        "family", "n", "KA.", "DB.", "Score", "ToolCalls"
    ));
    for (family, s) in &report.per_family {
        out.push_str(&format!(
            "{:<12} {:>6} {:>7} {:>7} {:>7} {:>10}\n",
            family.as_str(),
            s.count,
            cell(s.ka_pct),
            cell(s.db_pct),
            cell(s.score_pct),
            cell(s.mean_tool_calls),
        ));
    }
    let t = &report.total;
    out.push_str(&format!(
        "{:<12} {:>6} {:>7} {:>7} {:>7} {:>10}\n",
        "total",
        t.count,
        cell(t.ka_pct),
        cell(t.db_pct),
        cell(t.score_pct),
        cell(t.mean_tool_calls),
    ));
    out.push_str("terminations:");
    for (k, v) in &report.terminations {
        out.push_str(&format!(" {k}={v}"));
    }
    out.push('\n');
    out
}

// ---------------------------------------------------------------------------
// Fleiss kappa
// ---------------------------------------------------------------------------

/// Standard Fleiss kappa over a tasks x categories count matrix; every row
/// must sum to the same number of raters (>= 2). Perfect agreement on a
/// degenerate single-category matrix is 1.0 by convention.
pub fn fleiss_kappa(matrix: &[Vec<u32>]) -> Result<f64, ScoreError> {
    if matrix.is_empty() || matrix[0].is_empty() {
        return Err(ScoreError::BadMatrix);
    }
    let categories = matrix[0].len();
    let raters: u32 = matrix[0].iter().sum();
    if raters < 2 {
        return Err(ScoreError::TooFewRaters);
    }
    if matrix
        .iter()
        .any(|row| row.len() != categories || row.iter().sum::<u32>() != raters)
    {
        return Err(ScoreError::BadMatrix);
    }
    let n_tasks = matrix.len() as f64;
    let n = raters as f64;

    let p_bar = matrix
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_tasks;

    let p_e: f64 = (0..categories)
        .map(|j| {
            let share = matrix.iter().map(|row| row[j] as f64).sum::<f64>() / (n_tasks * n);
            share * share
        })
        .sum();

    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(if (1.0 - p_bar).abs() < 1e-12 {
            1.0
        } else {
            0.0
        });
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{Speaker, TranscriptEntry};
    use crate::fixtures;
    use crate::world::{FieldWrite, OrderStatus};

    fn transcript(messages: &[(&str, Speaker)]) -> Transcript {
        Transcript {
            entries: messages
                .iter()
                .map(|(text, speaker)| TranscriptEntry {
                    speaker: *speaker,
                    text: text.to_string(),
                    asset_markers: Vec::new(),
                })
                .collect(),
        }
    }

    fn judge() -> FallbackJudge {
        FallbackJudge::for_world(&fixtures::small_world().data)
    }

    #[test]
    fn key_answers_match_by_token_containment() {
        let t = transcript(&[
            ("Do I need to advance anything?", Speaker::User),
            (
                "With your insurance you need to advance 3.0 RMB for return shipping.",
                Speaker::Assistant,
            ),
            (
                "The estimated arrival time is 13:00 on June 14.",
                Speaker::Assistant,
            ),
        ]);
        let keys = vec![
            "advance 3.0 RMB".to_string(),
            "arrival time is 13:00 on June 14".to_string(),
        ];
        let (ok, missing) = key_answer_score(&t, &keys, &judge());
        assert!(ok, "missing: {missing:?}");
    }

    #[test]
    fn wrong_amount_is_not_an_exact_match() {
        let t = transcript(&[(
            "You need to advance 3.5 RMB for return shipping.",
            Speaker::Assistant,
        )]);
        let (ok, missing) = key_answer_score(&t, &["advance 3.0 RMB".to_string()], &judge());
        assert!(!ok);
        assert_eq!(missing.len(), 1);
    }

    #[test]
    fn user_side_text_never_satisfies_a_key() {
        let t = transcript(&[("advance 3.0 RMB", Speaker::User)]);
        let (ok, _) = key_answer_score(&t, &["advance 3.0 RMB".to_string()], &judge());
        assert!(!ok, "only assistant messages count");
    }

    #[test]
    fn empty_key_list_is_vacuously_satisfied() {
        let (ok, _) = key_answer_score(&Transcript::default(), &[], &judge());
        assert!(ok);
    }

    #[test]
    fn database_score_identity_and_strictness() {
        let state = fixtures::small_world();
        let a = state.snapshot();
        let (ok, diffs) = database_score(&a, &a, &judge());
        assert!(ok);
        assert!(diffs.is_empty());

        let mut state2 = fixtures::small_world();
        state2
            .apply(FieldWrite::OrderStatus {
                order_id: "O1".into(),
                status: OrderStatus::Cancelled,
            })
            .unwrap();
        let (ok, diffs) = database_score(&a, &state2.snapshot(), &judge());
        assert!(!ok);
        assert_eq!(diffs.len(), 1);
    }

    #[test]
    fn remark_wording_is_judged_semantically() {
        let mut got = fixtures::small_world();
        got.apply(FieldWrite::RemarkAppend {
            order_id: "O1".into(),
            content: "resend missing cup".into(),
        })
        .unwrap();
        let mut want = fixtures::small_world();
        want.apply(FieldWrite::RemarkAppend {
            order_id: "O1".into(),
            content: "will resend the missing cup".into(),
        })
        .unwrap();
        let (ok, diffs) = database_score(&got.snapshot(), &want.snapshot(), &judge());
        assert!(ok, "diffs: {diffs:?}");

        // Brand mentions must match exactly.
        let mut got_b = fixtures::small_world();
        got_b
            .apply(FieldWrite::RemarkAppend {
                order_id: "O1".into(),
                content: "ship with SafeLine".into(),
            })
            .unwrap();
        let mut want_b = fixtures::small_world();
        want_b
            .apply(FieldWrite::RemarkAppend {
                order_id: "O1".into(),
                content: "ship with FastExpress".into(),
            })
            .unwrap();
        let (ok, _) = database_score(&got_b.snapshot(), &want_b.snapshot(), &judge());
        assert!(!ok);
    }

    #[test]
    fn aggregate_percentages() {
        let rec = |ka: bool, db: bool, family| ScoreRecord {
            task_id: "t".into(),
            family,
            ka,
            db,
            score: ka && db,
            missing_keys: vec![],
            diffs: vec![],
            tool_calls: 5,
            termination: Termination::Completed,
            fallback_judge: true,
        };
        let report = aggregate(&[
            rec(true, true, TaskFamily::Logistics),
            rec(true, false, TaskFamily::Logistics),
        ])
        .unwrap();
        let logi = &report.per_family[&TaskFamily::Logistics];
        assert_eq!(logi.ka_pct, Some(100.0));
        assert_eq!(logi.db_pct, Some(50.0));
        assert_eq!(logi.score_pct, Some(50.0));
        // Empty bucket renders "-".
        let text = render_report(&report);
        assert!(
            text.lines()
                .any(|l| l.starts_with("pre-sales") && l.contains('-')),
            "{text}"
        );
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn kappa_edge_cases() {
        // Perfect agreement.
        let m = vec![vec![5, 0], vec![0, 5], vec![5, 0]];
        assert!((fleiss_kappa(&m).unwrap() - 1.0).abs() < 1e-12);
        // Agreement exactly at chance: half the pairs agree, marginals
        // 50/50, so observed agreement equals expected agreement.
        let m = vec![vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]];
        assert!(fleiss_kappa(&m).unwrap().abs() < 1e-12);
        // Degenerate single category.
        let m = vec![vec![4], vec![4]];
        assert!((fleiss_kappa(&m).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fleiss_kappa(&[]).unwrap_err(), ScoreError::BadMatrix);
        assert_eq!(
            fleiss_kappa(&[vec![1, 0]]).unwrap_err(),
            ScoreError::TooFewRaters
        );
        assert_eq!(
            fleiss_kappa(&[vec![2, 0], vec![1, 0]]).unwrap_err(),
            ScoreError::BadMatrix
        );
    }

    #[test]
    fn remote_judge_caches_and_falls_back() {
        use crate::agents::ScriptedBackend;
        // One scripted verdict, then exhaustion: the second distinct query
        // falls back deterministically, the repeated one hits the cache.
        let backend = Arc::new(ScriptedBackend::new(vec!["0".into()]));
        let judge = RemoteJudge::new(backend, 7, super::FallbackJudge::new(Vec::<String>::new()));
        assert!(!judge.key_answer_present("the fee is 3.0", "fee is 3.0"));
        // Cached: same result without a backend call.
        assert!(!judge.key_answer_present("the fee is 3.0", "fee is 3.0"));
        // New input: backend exhausted, falls back to containment (true).
        assert!(judge.key_answer_present("the fee is 4.0", "fee is 4.0"));
    }
}
