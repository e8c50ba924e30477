//! Human distinguishability survey: form generation, rendering, and scoring.
//!
//! Numbers in forms and in response files are 1-based, as printed: tests
//! 1..=10, attention checks 11..=13, and choices 1..=3.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetPair, Entry, Role};
use crate::eval::{ChatProvider, ChatRequest, RequestContext, Stage};
use crate::stats::{binom_test, Sidedness, TestResult};
use crate::svg::escape;

use super::SuiteError;

pub const NUM_EXAMPLES: usize = 10;
pub const NUM_TESTS: usize = 10;
pub const NUM_ATTENTION: usize = 3;
pub const CHOICES: usize = 3;

pub const INSTRUCTIONS: &str = "This form assesses to what extent humans are able to distinguish two datasets.\n\n\
You will be presented with a number of tests. Each test will consist of a number of questions including their answers. One of these questions comes from a different dataset than the others.\n\n\
Your task is to identify which question comes from a different dataset than the others.\n\n\
You will be shown a number of examples from the two datasets to give you an opportunity to identify high-level patterns.\n\n\
Please do not look up these datasets nor google the answers - use your own best judgement.";

const ORDINALS: [&str; CHOICES] = ["first", "second", "third"];

/// A question shown together with its correct answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub entry_id: String,
    pub question: String,
    pub answer: String,
}

impl SurveyItem {
    fn of(e: &Entry) -> Self {
        SurveyItem { entry_id: e.id.clone(), question: e.question.clone(), answer: e.correct_option().to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyTest {
    pub number: usize,
    pub items: Vec<SurveyItem>,
}

/// Instructed-response item: the prompt names the choice to pick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionCheck {
    pub number: usize,
    pub prompt: String,
    pub choices: Vec<String>,
    /// Shown after this many tests.
    pub after_test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyForm {
    pub form_id: String,
    pub seed: u64,
    pub instructions: String,
    pub target_label: String,
    pub retro_label: String,
    pub target_examples: Vec<SurveyItem>,
    pub retro_examples: Vec<SurveyItem>,
    pub tests: Vec<SurveyTest>,
    pub attention_checks: Vec<AttentionCheck>,
}

/// Answers for one form, kept apart from what participants see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyKey {
    pub form_id: String,
    /// Choice holding the retro entry, per test, in test order.
    pub retro_choice: Vec<usize>,
    /// Expected choice per attention check number.
    pub attention: BTreeMap<usize, usize>,
}

impl SurveyKey {
    fn expected(&self, number: usize) -> Option<usize> {
        if (1..=self.retro_choice.len()).contains(&number) {
            Some(self.retro_choice[number - 1])
        } else {
            self.attention.get(&number).copied()
        }
    }
}

/// Draws a form without replacement: 10 labelled examples per dataset, then
/// 10 tests of two target entries and one retro entry in random order.
pub fn generate_survey(pair: &DatasetPair, seed: u64) -> Result<(SurveyForm, SurveyKey), SuiteError> {
    let need_t = NUM_EXAMPLES + 2 * NUM_TESTS;
    let need_r = NUM_EXAMPLES + NUM_TESTS;
    for (ds, need) in [(&pair.target, need_t), (&pair.retro, need_r)] {
        if ds.len() < need {
            return Err(SuiteError::Capacity(format!("{} has {} entries, a survey form needs {need}", ds.name, ds.len())));
        }
    }
    let mut rng = crate::rng::from_seed(seed);
    let mut t: Vec<&Entry> = pair.target.entries.iter().collect();
    let (t, _) = t.partial_shuffle(&mut rng, need_t);
    let mut r: Vec<&Entry> = pair.retro.entries.iter().collect();
    let (r, _) = r.partial_shuffle(&mut rng, need_r);

    let mut tests = Vec::with_capacity(NUM_TESTS);
    let mut retro_choice = Vec::with_capacity(NUM_TESTS);
    for i in 0..NUM_TESTS {
        let mut items = vec![SurveyItem::of(t[NUM_EXAMPLES + 2 * i]), SurveyItem::of(t[NUM_EXAMPLES + 2 * i + 1])];
        let pos = rng.random_range(0..CHOICES);
        items.insert(pos, SurveyItem::of(r[NUM_EXAMPLES + i]));
        tests.push(SurveyTest { number: i + 1, items });
        retro_choice.push(pos + 1);
    }
    let mut attention = BTreeMap::new();
    let attention_checks = (0..NUM_ATTENTION)
        .map(|k| {
            let pick = rng.random_range(0..CHOICES);
            let number = NUM_TESTS + k + 1;
            attention.insert(number, pick + 1);
            AttentionCheck {
                number,
                prompt: format!("This is an attention check. Please select the {} option.", ORDINALS[pick]),
                choices: ORDINALS.iter().map(|o| format!("The {o} option")).collect(),
                after_test: (k + 1) * NUM_TESTS / NUM_ATTENTION,
            }
        })
        .collect();
    let form_id = format!("form-{seed}");
    let form = SurveyForm {
        form_id: form_id.clone(),
        seed,
        instructions: INSTRUCTIONS.to_string(),
        target_label: "Dataset A".into(),
        retro_label: "Dataset B".into(),
        target_examples: t[..NUM_EXAMPLES].iter().map(|e| SurveyItem::of(e)).collect(),
        retro_examples: r[..NUM_EXAMPLES].iter().map(|e| SurveyItem::of(e)).collect(),
        tests,
        attention_checks,
    };
    let key = SurveyKey { form_id, retro_choice, attention };
    form.validate(&key, pair)?;
    Ok((form, key))
}

impl SurveyForm {
    /// Structural check of a form against its key and the pair it was drawn from.
    pub fn validate(&self, key: &SurveyKey, pair: &DatasetPair) -> Result<(), SuiteError> {
        let bad = |m: String| Err(SuiteError::Invalid(format!("{}: {m}", self.form_id)));
        if key.form_id != self.form_id {
            return bad(format!("key belongs to {}", key.form_id));
        }
        if self.target_examples.len() != NUM_EXAMPLES || self.retro_examples.len() != NUM_EXAMPLES {
            return bad("wrong number of examples".into());
        }
        if self.tests.len() != NUM_TESTS || key.retro_choice.len() != NUM_TESTS {
            return bad("wrong number of tests".into());
        }
        if self.attention_checks.len() != NUM_ATTENTION || key.attention.len() != NUM_ATTENTION {
            return bad("wrong number of attention checks".into());
        }
        let role_of = |id: &str| {
            if pair.target.get(id).is_some() {
                Some(Role::Target)
            } else if pair.retro.get(id).is_some() {
                Some(Role::Retro)
            } else {
                None
            }
        };
        let mut seen = HashSet::new();
        let mut check = |item: &SurveyItem, role: Role| -> Result<(), SuiteError> {
            if !seen.insert(item.entry_id.clone()) {
                return bad(format!("entry {} appears twice", item.entry_id));
            }
            if role_of(&item.entry_id) != Some(role) {
                return bad(format!("entry {} is not a {role} entry", item.entry_id));
            }
            Ok(())
        };
        for item in &self.target_examples {
            check(item, Role::Target)?;
        }
        for item in &self.retro_examples {
            check(item, Role::Retro)?;
        }
        for (i, test) in self.tests.iter().enumerate() {
            if test.number != i + 1 || test.items.len() != CHOICES {
                return bad(format!("malformed test {}", test.number));
            }
            for (pos, item) in test.items.iter().enumerate() {
                let role = if pos + 1 == key.retro_choice[i] { Role::Retro } else { Role::Target };
                check(item, role)?;
            }
        }
        for a in &self.attention_checks {
            match key.attention.get(&a.number) {
                Some(&c) if (1..=a.choices.len()).contains(&c) => {}
                _ => return bad(format!("attention check {} has no valid answer", a.number)),
            }
        }
        Ok(())
    }

    fn write_item(out: &mut String, n: usize, item: &SurveyItem) {
        let _ = writeln!(out, "{n}. {}  \n   Answer: {}", item.question, item.answer);
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Survey {}\n\n## Instructions\n\n{}\n\n", self.form_id, self.instructions);
        for (label, items) in [(&self.target_label, &self.target_examples), (&self.retro_label, &self.retro_examples)] {
            let _ = writeln!(out, "## Examples from {label}\n");
            for (i, item) in items.iter().enumerate() {
                Self::write_item(&mut out, i + 1, item);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "## Tests\n\nIn each test, pick the question that comes from a different dataset than the others.\n");
        for test in &self.tests {
            let _ = writeln!(out, "### Test {}\n", test.number);
            for (i, item) in test.items.iter().enumerate() {
                Self::write_item(&mut out, i + 1, item);
            }
            out.push('\n');
            for a in self.attention_checks.iter().filter(|a| a.after_test == test.number) {
                let _ = writeln!(out, "### Test {}\n\n{}\n", a.number, a.prompt);
                for (i, c) in a.choices.iter().enumerate() {
                    let _ = writeln!(out, "{}. {c}", i + 1);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_html(&self) -> String {
        let mut out = format!(
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Survey {id}</title></head><body>\n<h1>Survey {id}</h1>\n<h2>Instructions</h2>\n",
            id = escape(&self.form_id)
        );
        for para in self.instructions.split("\n\n") {
            let _ = writeln!(out, "<p>{}</p>", escape(para));
        }
        let items = |out: &mut String, items: &[SurveyItem]| {
            out.push_str("<ol>\n");
            for item in items {
                let _ = writeln!(out, "<li>{}<br><em>Answer: {}</em></li>", escape(&item.question), escape(&item.answer));
            }
            out.push_str("</ol>\n");
        };
        for (label, ex) in [(&self.target_label, &self.target_examples), (&self.retro_label, &self.retro_examples)] {
            let _ = writeln!(out, "<h2>Examples from {}</h2>", escape(label));
            items(&mut out, ex);
        }
        out.push_str("<h2>Tests</h2>\n");
        for test in &self.tests {
            let _ = writeln!(out, "<h3>Test {}</h3>", test.number);
            items(&mut out, &test.items);
            for a in self.attention_checks.iter().filter(|a| a.after_test == test.number) {
                let _ = writeln!(out, "<h3>Test {}</h3>\n<p>{}</p>\n<ol>", a.number, escape(&a.prompt));
                for c in &a.choices {
                    let _ = writeln!(out, "<li>{}</li>", escape(c));
                }
                out.push_str("</ol>\n");
            }
        }
        out.push_str("</body></html>\n");
        out
    }
}

/// One answer of one participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub participant_id: String,
    #[serde(rename = "test_index")]
    pub test_number: usize,
    #[serde(rename = "chosen_entry_index")]
    pub choice: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form_id: Option<String>,
}

/// Reads `participant_id,test_index,chosen_entry_index[,form_id]` CSV.
pub fn parse_responses_csv(text: &str) -> Result<Vec<SurveyResponse>, SuiteError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<SurveyResponse>().enumerate() {
        let mut r = row.map_err(|e| SuiteError::Parse { line: i + 2, message: e.to_string() })?;
        if r.form_id.as_deref().is_some_and(str::is_empty) {
            r.form_id = None;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn responses_to_csv(responses: &[SurveyResponse]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["participant_id", "test_index", "chosen_entry_index", "form_id"]).expect("in-memory write");
    for r in responses {
        w.write_record([
            r.participant_id.as_str(),
            &r.test_number.to_string(),
            &r.choice.to_string(),
            r.form_id.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyOutcome {
    /// Exact binomial test of the pooled hit rate against 1/3.
    pub test: TestResult,
    pub correct: u64,
    pub total: u64,
    pub participants_included: usize,
    pub participants_excluded: Vec<String>,
}

impl SurveyOutcome {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Pools every answered test of every attentive participant. A participant
/// who misses or fails any attention check is excluded.
pub fn score_survey(responses: &[SurveyResponse], keys: &[SurveyKey]) -> Result<SurveyOutcome, SuiteError> {
    let by_id: BTreeMap<&str, &SurveyKey> = keys.iter().map(|k| (k.form_id.as_str(), k)).collect();
    let mut participants: BTreeMap<&str, Vec<&SurveyResponse>> = BTreeMap::new();
    for r in responses {
        participants.entry(&r.participant_id).or_default().push(r);
    }
    let (mut correct, mut total, mut included) = (0u64, 0u64, 0usize);
    let mut excluded = Vec::new();
    for (pid, rows) in participants {
        let form_ids: HashSet<Option<&str>> = rows.iter().map(|r| r.form_id.as_deref()).collect();
        let key = match (form_ids.len(), form_ids.iter().next().copied().flatten()) {
            (1, Some(id)) => *by_id.get(id).ok_or_else(|| SuiteError::UnknownForm(id.to_string()))?,
            (1, None) if keys.len() == 1 => &keys[0],
            (1, None) => {
                return Err(SuiteError::Invalid(format!("{pid}: form_id is required when scoring several forms")))
            }
            _ => return Err(SuiteError::Invalid(format!("{pid}: answers refer to more than one form"))),
        };
        let mut answers = BTreeMap::new();
        for r in &rows {
            let expected = key
                .expected(r.test_number)
                .ok_or_else(|| SuiteError::Invalid(format!("{pid}: no test {} on {}", r.test_number, key.form_id)))?;
            if !(1..=CHOICES).contains(&r.choice) {
                return Err(SuiteError::Invalid(format!("{pid}: choice {} out of range", r.choice)));
            }
            if answers.insert(r.test_number, r.choice == expected).is_some() {
                return Err(SuiteError::Invalid(format!("{pid}: test {} answered twice", r.test_number)));
            }
        }
        if key.attention.keys().any(|n| answers.get(n) != Some(&true)) {
            excluded.push(pid.to_string());
            continue;
        }
        included += 1;
        for n in 1..=key.retro_choice.len() {
            if let Some(&hit) = answers.get(&n) {
                total += 1;
                correct += hit as u64;
            }
        }
    }
    if total == 0 {
        return Err(SuiteError::Insufficient("no scored survey answers".into()));
    }
    let b = binom_test(correct, total, 1.0 / 3.0, Sidedness::TwoSided)?;
    Ok(SurveyOutcome {
        test: TestResult::new(correct as f64 / total as f64, b.p_value, "the retro entry is picked with probability 1/3"),
        correct,
        total,
        participants_included: included,
        participants_excluded: excluded,
    })
}

fn annotator_prompt(form: &SurveyForm, question: &str, choices: &[String]) -> String {
    let mut out = format!("{}\n\n", form.instructions);
    for (label, items) in [(&form.target_label, &form.target_examples), (&form.retro_label, &form.retro_examples)] {
        let _ = writeln!(out, "Examples from {label}:");
        for item in items {
            let _ = writeln!(out, "- {} Answer: {}", item.question, item.answer);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{question}");
    for (i, c) in choices.iter().enumerate() {
        let _ = writeln!(out, "{}. {c}", i + 1);
    }
    out.push_str("Reply with the number of your choice only.");
    out
}

fn parse_choice(response: &str) -> Option<usize> {
    response
        .chars()
        .find(|c| c.is_ascii_digit())
        .and_then(|c| c.to_digit(10))
        .map(|d| d as usize)
        .filter(|d| (1..=CHOICES).contains(d))
}

/// Has a model take the survey as participant `participant_id`: each test and
/// attention check becomes one request. Unparseable replies are left unanswered.
pub fn annotate_survey(
    form: &SurveyForm,
    provider: &dyn ChatProvider,
    participant_id: &str,
    temperature: f64,
    max_tokens: u32,
) -> Result<Vec<SurveyResponse>, SuiteError> {
    let mut asks: Vec<(usize, String)> = form
        .tests
        .iter()
        .map(|t| {
            let choices: Vec<String> = t.items.iter().map(|i| format!("{} Answer: {}", i.question, i.answer)).collect();
            (
                t.number,
                annotator_prompt(form, "Which of these questions comes from a different dataset than the others?", &choices),
            )
        })
        .collect();
    asks.extend(form.attention_checks.iter().map(|a| (a.number, annotator_prompt(form, &a.prompt, &a.choices))));
    let mut out = Vec::new();
    for (number, body) in asks {
        let request = ChatRequest {
            body,
            temperature,
            max_tokens,
            context: RequestContext {
                entry_id: format!("{}/{participant_id}/test-{number}", form.form_id),
                repeat: 0,
                attempt: 0,
                stage: Stage::NumericIndex,
                rotation_offset: 0,
                top_k: None,
            },
        };
        let reply = provider.complete(&request)?;
        match parse_choice(&reply) {
            Some(choice) => out.push(SurveyResponse {
                participant_id: participant_id.to_string(),
                test_number: number,
                choice,
                form_id: Some(form.form_id.clone()),
            }),
            None => log::warn!("{participant_id}: unparseable answer to test {number}: {reply:?}"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ScriptedProvider;
    use crate::synth::{synthetic_dataset, SynthSpec};

    fn pair(nt: usize, nr: usize) -> DatasetPair {
        let t = synthetic_dataset("t", "t", nt, &SynthSpec::topic(0), 1).unwrap();
        let r = synthetic_dataset("r", "r", nr, &SynthSpec::topic(0), 2).unwrap();
        DatasetPair::new(t, r).unwrap()
    }

    fn answers(form: &SurveyForm, key: &SurveyKey, pid: &str, pick: impl Fn(usize, usize) -> usize) -> Vec<SurveyResponse> {
        let mut out: Vec<SurveyResponse> = form
            .tests
            .iter()
            .map(|t| SurveyResponse {
                participant_id: pid.into(),
                test_number: t.number,
                choice: pick(t.number, key.retro_choice[t.number - 1]),
                form_id: Some(form.form_id.clone()),
            })
            .collect();
        out.extend(key.attention.iter().map(|(&n, &c)| SurveyResponse {
            participant_id: pid.into(),
            test_number: n,
            choice: c,
            form_id: Some(form.form_id.clone()),
        }));
        out
    }

    #[test]
    fn minimal_pair_is_exhausted() {
        let p = pair(30, 20);
        let (form, key) = generate_survey(&p, 4).unwrap();
        form.validate(&key, &p).unwrap();
        let used: HashSet<&str> = form
            .target_examples
            .iter()
            .chain(&form.retro_examples)
            .chain(form.tests.iter().flat_map(|t| &t.items))
            .map(|i| i.entry_id.as_str())
            .collect();
        assert_eq!(used.len(), 50);
        assert_eq!(generate_survey(&p, 4).unwrap(), (form, key));
        assert!(matches!(generate_survey(&pair(29, 20), 0), Err(SuiteError::Capacity(_))));
        assert!(matches!(generate_survey(&pair(30, 19), 0), Err(SuiteError::Capacity(_))));
    }

    #[test]
    fn validator_catches_tampering() {
        let p = pair(40, 30);
        let (mut form, key) = generate_survey(&p, 1).unwrap();
        form.tests[0].items.swap(0, 1);
        form.tests[0].items.swap(1, 2);
        let moved = form.validate(&key, &p);
        let (mut form2, _) = generate_survey(&p, 1).unwrap();
        form2.tests[1].items[0] = form2.target_examples[0].clone();
        assert!(form2.validate(&key, &p).is_err());
        // A rotation of three items always moves the retro entry.
        assert!(moved.is_err());
    }

    #[test]
    fn renders_every_item() {
        let p = pair(30, 20);
        let (form, _) = generate_survey(&p, 2).unwrap();
        let md = form.to_markdown();
        let html = form.to_html();
        assert!(md.contains("use your own best judgement"));
        for n in 1..=13 {
            assert!(md.contains(&format!("### Test {n}\n")), "test {n}");
            assert!(html.contains(&format!("<h3>Test {n}</h3>")));
        }
        assert!(!html.contains("<script"));
    }

    #[test]
    fn scoring_and_exclusion() {
        let p = pair(30, 20);
        let (form, key) = generate_survey(&p, 3).unwrap();
        let mut rs = answers(&form, &key, "good", |_, c| c);
        let mut sloppy = answers(&form, &key, "sloppy", |_, c| c);
        let check = sloppy.iter_mut().find(|r| r.test_number == 11).unwrap();
        check.choice = check.choice % 3 + 1;
        rs.extend(sloppy);
        let out = score_survey(&rs, std::slice::from_ref(&key)).unwrap();
        assert_eq!((out.correct, out.total, out.participants_included), (10, 10, 1));
        assert_eq!(out.participants_excluded, ["sloppy"]);
        assert!(out.test.reject_at_5pct);

        let mut csv_rows = parse_responses_csv(&responses_to_csv(&rs)).unwrap();
        assert_eq!(csv_rows, rs);
        csv_rows[0].form_id = Some("nope".into());
        csv_rows.iter_mut().filter(|r| r.participant_id == "good").for_each(|r| r.form_id = Some("nope".into()));
        assert!(matches!(score_survey(&csv_rows, &[key.clone()]), Err(SuiteError::UnknownForm(_))));
    }

    #[test]
    fn csv_without_form_column() {
        let rows = parse_responses_csv("participant_id,test_index,chosen_entry_index\np1,1,2\np1,11,3\n").unwrap();
        assert_eq!(rows[1], SurveyResponse { participant_id: "p1".into(), test_number: 11, choice: 3, form_id: None });
        assert!(parse_responses_csv("participant_id,test_index,chosen_entry_index\np1,x,2\n").is_err());
    }

    #[test]
    fn table_two_human_row() {
        let b = binom_test(72, 230, 1.0 / 3.0, Sidedness::TwoSided).unwrap();
        assert!(!b.reject_at_5pct);
        assert!((72.0f64 / 230.0 - 0.313).abs() < 5e-4);
    }

    #[test]
    fn random_responders_are_calibrated() {
        let p = pair(30, 20);
        let (form, key) = generate_survey(&p, 3).unwrap();
        let mut rng = crate::rng::from_seed(11);
        let mut rejections = 0;
        for _ in 0..200 {
            let mut rs = Vec::new();
            for i in 0..23 {
                let picks: Vec<usize> = (0..NUM_TESTS).map(|_| rng.random_range(1..=3)).collect();
                rs.extend(answers(&form, &key, &format!("p{i}"), |n, _| picks[n - 1]));
            }
            rejections += score_survey(&rs, std::slice::from_ref(&key)).unwrap().test.reject_at_5pct as usize;
        }
        assert!(rejections <= 22, "{rejections} of 200");
    }

    #[test]
    fn model_annotator_round_trip() {
        let p = pair(30, 20);
        let (form, key) = generate_survey(&p, 8).unwrap();
        let retro_questions: HashSet<String> = p.retro.entries.iter().map(|e| e.question.clone()).collect();
        let rq = retro_questions.clone();
        // An oracle annotator that knows which questions are retro.
        let provider = ScriptedProvider::new("oracle", move |r| {
            let lines: Vec<&str> = r.body.lines().filter(|l| l.len() > 3 && l.as_bytes()[1] == b'.').collect();
            if let Some(i) = lines.iter().position(|l| rq.iter().any(|q| l.contains(q.as_str()))) {
                return Ok(format!("{}", i + 1));
            }
            let pick = ["first", "second", "third"].iter().position(|o| r.body.contains(&format!("select the {o}"))).unwrap();
            Ok(format!("{}", pick + 1))
        });
        let rs = annotate_survey(&form, &provider, "oracle", 0.0, 8).unwrap();
        assert_eq!(rs.len(), 13);
        let out = score_survey(&rs, &[key]).unwrap();
        assert_eq!((out.correct, out.total), (10, 10));
        assert_eq!(parse_choice("I pick 2."), Some(2));
        assert_eq!(parse_choice("none"), None);
        assert_eq!(parse_choice("7"), None);
    }
}
