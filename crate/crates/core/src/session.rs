//! k-anonymized clicking and the pseudo-profile it produces.
//!
//! A session runs obfuscated queries, clicks `k > 1` results split between
//! intent-relevant and decoy hits, and then watches which ads a profile-
//! driven ad network serves. The exposure report measures how many of those
//! ads target the user's specific intent.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscator::ObfuscatedQuery;
use crate::searchsim::{Ad, AdInventory, Corpus, ResultPage, SearchError};
use crate::textmine::{normalize_tokens, PipelineConfig, RelevanceRule, TextError};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("k_clicks must be at least 2, got {0}")]
    TooFewClicks(usize),
    #[error("decoy_fraction must lie in [0, 1], got {0}")]
    BadDecoyFraction(f64),
    #[error("page {query_id} has {hits} hits but {k_clicks} clicks were requested")]
    PageTooSmall {
        query_id: String,
        hits: usize,
        k_clicks: usize,
    },
    #[error("no ads were served")]
    NoAds,
    #[error("no queries to run")]
    NoQueries,
    #[error("days and ads_per_day must be at least 1")]
    EmptySchedule,
    #[error("target {target:?} is not on the current {kind} list")]
    UnknownTarget { target: String, kind: TargetKind },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickPolicy {
    pub k_clicks: usize,
    /// Share of clicks that go to results not relevant to the intent.
    pub decoy_fraction: f64,
    pub include_ads: bool,
}

impl ClickPolicy {
    pub fn new(k_clicks: usize, decoy_fraction: f64, include_ads: bool) -> Result<Self, SessionError> {
        let policy = Self {
            k_clicks,
            decoy_fraction,
            include_ads,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.k_clicks < 2 {
            return Err(SessionError::TooFewClicks(self.k_clicks));
        }
        if !(0.0..=1.0).contains(&self.decoy_fraction) {
            return Err(SessionError::BadDecoyFraction(self.decoy_fraction));
        }
        Ok(())
    }

    /// Number of decoy clicks among `k_clicks`.
    pub fn decoy_clicks(&self) -> usize {
        (self.k_clicks as f64 * self.decoy_fraction).round() as usize
    }
}

impl Default for ClickPolicy {
    fn default() -> Self {
        Self {
            k_clicks: 4,
            decoy_fraction: 0.5,
            include_ads: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Result,
    Ad,
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetKind::Result => "result",
            TargetKind::Ad => "ad",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub session_id: String,
    pub query_id: String,
    pub target: String,
    pub target_kind: TargetKind,
    pub categories: Vec<String>,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdImpression {
    pub session_id: String,
    pub day: usize,
    pub ad_id: String,
    pub category: String,
    pub specific: bool,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Click(ClickEvent),
    AdImpression(AdImpression),
}

/// Category histogram a tracker would build from the session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoProfile {
    pub category_weights: BTreeMap<String, u64>,
    pub total: u64,
}

impl PseudoProfile {
    pub fn add(&mut self, category: &str, count: u64) {
        *self.category_weights.entry(category.to_string()).or_insert(0) += count;
        self.total += count;
    }

    pub fn weight(&self, category: &str) -> u64 {
        self.category_weights.get(category).copied().unwrap_or(0)
    }

    pub fn share(&self, category: &str) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.weight(category) as f64 / self.total as f64
        }
    }

    fn apply(&mut self, event: &ClickEvent) {
        for c in &event.categories {
            self.add(c, 1);
        }
    }
}

/// Returns `profile` plus one increment per (event, category) pair.
pub fn update_profile(profile: &PseudoProfile, events: &[ClickEvent]) -> PseudoProfile {
    let mut next = profile.clone();
    for e in events {
        next.apply(e);
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub total_ads: usize,
    pub specific_ads: usize,
    pub conceptual_breakdown: BTreeMap<String, usize>,
    pub exposure: f64,
}

/// Decides whether an ad targets the specific intent: some tag's normalized
/// tokens are all present among the intent's tokens.
#[derive(Debug, Clone)]
pub struct SpecificityRule {
    intent_tokens: HashSet<String>,
    config: PipelineConfig,
}

impl SpecificityRule {
    pub fn new(intent_phrase: &str, config: &PipelineConfig) -> Result<Self, SessionError> {
        let intent_tokens: HashSet<String> = normalize_tokens(intent_phrase, config).into_iter().collect();
        if intent_tokens.is_empty() {
            return Err(TextError::EmptyIntent(intent_phrase.to_string()).into());
        }
        Ok(Self {
            intent_tokens,
            config: config.clone(),
        })
    }

    pub fn is_specific(&self, ad: &Ad) -> bool {
        ad.specific_tags.iter().any(|tag| {
            let tokens = normalize_tokens(tag, &self.config);
            !tokens.is_empty() && tokens.iter().all(|t| self.intent_tokens.contains(t))
        })
    }
}

pub fn exposure_report(
    ads_served: &[Ad],
    intent_phrase: &str,
    config: &PipelineConfig,
) -> Result<ExposureReport, SessionError> {
    if ads_served.is_empty() {
        return Err(SessionError::NoAds);
    }
    let rule = SpecificityRule::new(intent_phrase, config)?;
    let mut breakdown = BTreeMap::new();
    let mut specific = 0;
    for ad in ads_served {
        *breakdown.entry(ad.category.clone()).or_insert(0) += 1;
        if rule.is_specific(ad) {
            specific += 1;
        }
    }
    Ok(ExposureReport {
        total_ads: ads_served.len(),
        specific_ads: specific,
        conceptual_breakdown: breakdown,
        exposure: specific as f64 / ads_served.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickPlan {
    pub events: Vec<ClickEvent>,
    pub relevant_clicks: usize,
    pub decoy_clicks: usize,
    /// Clicks moved to the other pool because one pool ran short.
    pub shifted: usize,
}

fn pick<R: Rng + ?Sized>(pool: &[usize], amount: usize, rng: &mut R) -> Vec<usize> {
    let mut chosen: Vec<usize> = index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Splits `k_clicks` between decoy and intent-relevant hits. Events come out
/// in rank order with timestamps counting up from `first_timestamp`.
pub fn plan_clicks<R: Rng + ?Sized>(
    session_id: &str,
    page: &ResultPage,
    corpus: &Corpus,
    relevance: &RelevanceRule,
    policy: &ClickPolicy,
    first_timestamp: u64,
    rng: &mut R,
) -> Result<ClickPlan, SessionError> {
    policy.validate()?;
    if page.hits.len() < policy.k_clicks {
        return Err(SessionError::PageTooSmall {
            query_id: page.query_id.clone(),
            hits: page.hits.len(),
            k_clicks: policy.k_clicks,
        });
    }
    let mut relevant = Vec::new();
    let mut decoy = Vec::new();
    for (rank, hit) in page.hits.iter().enumerate() {
        let doc = corpus
            .get(&hit.doc_id)
            .ok_or_else(|| TextError::UnknownDoc(hit.doc_id.clone()))?;
        if relevance.matches(&doc.text()) {
            relevant.push(rank);
        } else {
            decoy.push(rank);
        }
    }
    let mut want_decoy = policy.decoy_clicks();
    let mut want_relevant = policy.k_clicks - want_decoy;
    let mut shifted = 0;
    if want_decoy > decoy.len() {
        shifted = want_decoy - decoy.len();
        want_decoy = decoy.len();
        want_relevant += shifted;
    } else if want_relevant > relevant.len() {
        shifted = want_relevant - relevant.len();
        want_relevant = relevant.len();
        want_decoy += shifted;
    }
    if shifted > 0 {
        log::debug!("{}: moved {shifted} clicks between pools", page.query_id);
    }
    let mut ranks = pick(&decoy, want_decoy, rng);
    ranks.extend(pick(&relevant, want_relevant, rng));
    ranks.sort_unstable();
    let events = ranks
        .into_iter()
        .enumerate()
        .map(|(i, rank)| {
            let doc = corpus.get(&page.hits[rank].doc_id).expect("checked above");
            ClickEvent {
                session_id: session_id.to_string(),
                query_id: page.query_id.clone(),
                target: doc.id.clone(),
                target_kind: TargetKind::Result,
                categories: doc.categories.clone(),
                timestamp: first_timestamp + i as u64,
            }
        })
        .collect();
    Ok(ClickPlan {
        events,
        relevant_clicks: want_relevant,
        decoy_clicks: want_decoy,
        shifted,
    })
}

/// Mutable state of one session. Single writer: every change goes through
/// its methods, which keep profile, log and timestamps consistent.
#[derive(Debug, Clone, Default)]
pub struct Session {
    pub id: String,
    profile: PseudoProfile,
    log: Vec<LogRecord>,
    next_timestamp: u64,
    pages: BTreeMap<String, ResultPage>,
    ads_served: Vec<Ad>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Self::default()
        }
    }

    pub fn profile(&self) -> &PseudoProfile {
        &self.profile
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn ads_served(&self) -> &[Ad] {
        &self.ads_served
    }

    pub fn pages(&self) -> &BTreeMap<String, ResultPage> {
        &self.pages
    }

    pub fn next_timestamp(&self) -> u64 {
        self.next_timestamp
    }

    pub fn record_page(&mut self, page: ResultPage) {
        self.pages.insert(page.query_id.clone(), page);
    }

    /// Appends planned click events and folds them into the profile.
    pub fn record_clicks(&mut self, events: Vec<ClickEvent>) {
        for mut e in events {
            e.timestamp = self.next_timestamp;
            self.next_timestamp += 1;
            self.profile.apply(&e);
            self.log.push(LogRecord::Click(e));
        }
    }

    /// Logs an ad impression; folds its category into the profile when
    /// `affects_profile` is set.
    pub fn record_impression(&mut self, day: usize, ad: &Ad, specific: bool, affects_profile: bool) {
        if affects_profile {
            self.profile.add(&ad.category, 1);
        }
        self.log.push(LogRecord::AdImpression(AdImpression {
            session_id: self.id.clone(),
            day,
            ad_id: ad.id.clone(),
            category: ad.category.clone(),
            specific,
            timestamp: self.next_timestamp,
        }));
        self.next_timestamp += 1;
        self.ads_served.push(ad.clone());
    }

    /// A user click on a result of any page served in this session, or on an
    /// ad that was shown.
    pub fn click(&mut self, target: &str, kind: TargetKind, corpus: &Corpus) -> Result<&ClickEvent, SessionError> {
        let (query_id, categories) = match kind {
            TargetKind::Result => {
                let page = self
                    .pages
                    .values()
                    .rev()
                    .find(|p| p.contains(target))
                    .ok_or_else(|| SessionError::UnknownTarget {
                        target: target.to_string(),
                        kind,
                    })?;
                let doc = corpus.get(target).ok_or_else(|| SessionError::UnknownTarget {
                    target: target.to_string(),
                    kind,
                })?;
                (page.query_id.clone(), doc.categories.clone())
            }
            TargetKind::Ad => {
                let ad = self
                    .ads_served
                    .iter()
                    .rev()
                    .find(|a| a.id == target)
                    .ok_or_else(|| SessionError::UnknownTarget {
                        target: target.to_string(),
                        kind,
                    })?;
                (String::new(), vec![ad.category.clone()])
            }
        };
        self.record_clicks(vec![ClickEvent {
            session_id: self.id.clone(),
            query_id,
            target: target.to_string(),
            target_kind: kind,
            categories,
            timestamp: 0,
        }]);
        match self.log.last() {
            Some(LogRecord::Click(e)) => Ok(e),
            _ => unreachable!("click was just appended"),
        }
    }

    pub fn write_log_jsonl<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.log {
            serde_json::to_writer(&mut out, record)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSchedule {
    pub top_k: usize,
    pub days: usize,
    pub ads_per_day: usize,
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub session: Session,
    pub exposure: ExposureReport,
}

impl SessionOutcome {
    pub fn profile(&self) -> &PseudoProfile {
        self.session.profile()
    }

    pub fn log(&self) -> &[LogRecord] {
        self.session.log()
    }
}

/// Runs every query with policy-driven clicks, then serves
/// `days * ads_per_day` ads against the evolving profile. With
/// `include_ads`, impressions feed the profile and the user also clicks
/// `k_clicks` of each day's ads using the same decoy split.
#[allow(clippy::too_many_arguments)]
pub fn run_session<R: Rng + ?Sized>(
    session_id: &str,
    intent_phrase: &str,
    queries: &[ObfuscatedQuery],
    corpus: &Corpus,
    inventory: &AdInventory,
    relevance: &RelevanceRule,
    policy: &ClickPolicy,
    schedule: &SessionSchedule,
    rng: &mut R,
) -> Result<SessionOutcome, SessionError> {
    policy.validate()?;
    if queries.is_empty() {
        return Err(SessionError::NoQueries);
    }
    if schedule.days == 0 || schedule.ads_per_day == 0 {
        return Err(SessionError::EmptySchedule);
    }
    let specificity = SpecificityRule::new(intent_phrase, corpus.config())?;
    let mut session = Session::new(session_id);
    for query in queries {
        let page = corpus.execute(query, schedule.top_k)?;
        let plan = plan_clicks(
            session_id,
            &page,
            corpus,
            relevance,
            policy,
            session.next_timestamp(),
            rng,
        )?;
        session.record_page(page);
        session.record_clicks(plan.events);
    }
    for day in 1..=schedule.days {
        let mut todays = Vec::with_capacity(schedule.ads_per_day);
        for _ in 0..schedule.ads_per_day {
            let ad = inventory.sample(session.profile(), 1, rng)?.ads.remove(0);
            let specific = specificity.is_specific(&ad);
            session.record_impression(day, &ad, specific, policy.include_ads);
            todays.push((ad, specific));
        }
        if policy.include_ads {
            let specific: Vec<usize> = (0..todays.len()).filter(|&i| todays[i].1).collect();
            let other: Vec<usize> = (0..todays.len()).filter(|&i| !todays[i].1).collect();
            let k = policy.k_clicks.min(todays.len());
            let mut want_other = policy.decoy_clicks().min(k).min(other.len());
            let want_specific = (k - want_other).min(specific.len());
            want_other = (k - want_specific).min(other.len());
            let mut chosen = pick(&other, want_other, rng);
            chosen.extend(pick(&specific, want_specific, rng));
            chosen.sort_unstable();
            let events = chosen
                .into_iter()
                .map(|i| ClickEvent {
                    session_id: session_id.to_string(),
                    query_id: format!("day{day}"),
                    target: todays[i].0.id.clone(),
                    target_kind: TargetKind::Ad,
                    categories: vec![todays[i].0.category.clone()],
                    timestamp: 0,
                })
                .collect();
            session.record_clicks(events);
        }
    }
    let exposure = exposure_report(session.ads_served(), intent_phrase, corpus.config())?;
    Ok(SessionOutcome { session, exposure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::searchsim::{CorpusDoc, Hit};
    use crate::textmine::RelevanceMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc(id: &str, snippet: &str, cat: &str) -> CorpusDoc {
        CorpusDoc {
            id: id.into(),
            url: String::new(),
            title: String::new(),
            snippet: snippet.into(),
            categories: vec![cat.into()],
        }
    }

    fn mixed_corpus() -> Corpus {
        Corpus::from_docs(
            vec![
                doc("r1", "buy toyota camry", "cars"),
                doc("r2", "buy toyota corolla", "cars"),
                doc("d1", "samsung phone deal", "smartphones"),
                doc("d2", "zappos shoes", "fashion"),
                doc("d3", "nairobi travel guide", "travel"),
                doc("d4", "honda civic", "cars"),
            ],
            PipelineConfig::default(),
        )
        .unwrap()
    }

    fn page(ids: &[&str]) -> ResultPage {
        ResultPage {
            query_id: "Q1".into(),
            hits: ids
                .iter()
                .enumerate()
                .map(|(i, id)| Hit {
                    doc_id: id.to_string(),
                    score: 10.0 - i as f64,
                })
                .collect(),
            top_k: 10,
        }
    }

    fn rule() -> RelevanceRule {
        RelevanceRule::new("buy toyota", RelevanceMode::TokensAll, &PipelineConfig::default()).unwrap()
    }

    fn count_relevant(plan: &ClickPlan) -> usize {
        plan.events.iter().filter(|e| e.target.starts_with('r')).count()
    }

    #[test]
    fn policy_validation() {
        assert!(matches!(ClickPolicy::new(1, 0.5, false), Err(SessionError::TooFewClicks(1))));
        assert!(matches!(
            ClickPolicy::new(2, 1.5, false),
            Err(SessionError::BadDecoyFraction(_))
        ));
    }

    #[test]
    fn forced_even_split() {
        let corpus = mixed_corpus();
        let policy = ClickPolicy::new(2, 0.5, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = plan_clicks("s", &page(&["r1", "d1", "d2"]), &corpus, &rule(), &policy, 0, &mut rng).unwrap();
        assert_eq!(plan.events.len(), 2);
        assert_eq!(count_relevant(&plan), 1);
        assert_eq!(plan.shifted, 0);
    }

    #[test]
    fn zero_decoy_fraction_clicks_relevant_only() {
        let corpus = mixed_corpus();
        let policy = ClickPolicy::new(2, 0.0, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = plan_clicks(
            "s",
            &page(&["d1", "r1", "d2", "r2"]),
            &corpus,
            &rule(),
            &policy,
            0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(count_relevant(&plan), 2);
    }

    #[test]
    fn deficit_moves_to_other_pool() {
        let corpus = mixed_corpus();
        let policy = ClickPolicy::new(3, 0.0, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = plan_clicks("s", &page(&["r1", "d1", "d2"]), &corpus, &rule(), &policy, 0, &mut rng).unwrap();
        assert_eq!(plan.relevant_clicks, 1);
        assert_eq!(plan.decoy_clicks, 2);
        assert_eq!(plan.shifted, 2);
    }

    #[test]
    fn page_too_small() {
        let corpus = mixed_corpus();
        let policy = ClickPolicy::new(4, 0.5, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            plan_clicks("s", &page(&["r1", "d1"]), &corpus, &rule(), &policy, 0, &mut rng),
            Err(SessionError::PageTooSmall { .. })
        ));
    }

    #[test]
    fn profile_updates() {
        let empty = PseudoProfile::default();
        assert_eq!(update_profile(&empty, &[]), empty);
        let ev = |c: &str| ClickEvent {
            session_id: "s".into(),
            query_id: "q".into(),
            target: "t".into(),
            target_kind: TargetKind::Result,
            categories: vec![c.into()],
            timestamp: 0,
        };
        let p = update_profile(&empty, &[ev("cars"), ev("cars"), ev("cars")]);
        assert_eq!(p.weight("cars"), 3);
        assert_eq!(p.total, 3);
        assert_eq!(empty.total, 0);
    }

    fn ad(id: &str, cat: &str, tags: &[&str]) -> Ad {
        Ad {
            id: id.into(),
            text: id.into(),
            category: cat.into(),
            specific_tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn exposure_ratios() {
        let cfg = PipelineConfig::default();
        let mut ads: Vec<Ad> = (0..279).map(|i| ad(&format!("g{i}"), "cars", &[])).collect();
        ads.extend((0..14).map(|i| ad(&format!("t{i}"), "cars", &["toyota"])));
        let r = exposure_report(&ads, "buy a toyota 2014", &cfg).unwrap();
        assert_eq!(r.total_ads, 293);
        assert_eq!(r.specific_ads, 14);
        assert!((r.exposure - 14.0 / 293.0).abs() < 1e-15);
        assert!((r.exposure - 0.0478).abs() < 1e-4);

        let none = exposure_report(&ads[..10], "buy a toyota 2014", &cfg).unwrap();
        assert_eq!(none.exposure, 0.0);
        let all = exposure_report(&ads[279..], "buy a toyota 2014", &cfg).unwrap();
        assert_eq!(all.exposure, 1.0);
        assert!(matches!(exposure_report(&[], "toyota", &cfg), Err(SessionError::NoAds)));
    }

    #[test]
    fn tag_must_be_within_intent() {
        let cfg = PipelineConfig::default();
        let rule = SpecificityRule::new("buy a toyota 2014", &cfg).unwrap();
        assert!(rule.is_specific(&ad("a", "cars", &["Toyota"])));
        assert!(rule.is_specific(&ad("a", "cars", &["buy toyota 2014"])));
        assert!(!rule.is_specific(&ad("a", "cars", &["toyota camry"])));
        assert!(!rule.is_specific(&ad("a", "cars", &["honda"])));
    }

    #[test]
    fn interactive_click_checks_targets() {
        let corpus = mixed_corpus();
        let mut s = Session::new("s1");
        s.record_page(page(&["r1", "d1"]));
        s.click("r1", TargetKind::Result, &corpus).unwrap();
        assert!(matches!(
            s.click("d3", TargetKind::Result, &corpus),
            Err(SessionError::UnknownTarget { .. })
        ));
        assert!(s.click("x", TargetKind::Ad, &corpus).is_err());
        s.record_impression(1, &ad("a1", "cars", &[]), false, false);
        s.click("a1", TargetKind::Ad, &corpus).unwrap();
        assert_eq!(s.profile().total, 2);
        assert_eq!(s.log().len(), 3);
    }
}
