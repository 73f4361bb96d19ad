use super::config::*;
use super::stages::{load_arm_model, load_submit_model, SeedLayout};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::metrics::{
    auc, calibration, nfb_uauc, pfb_uauc, stratified_report, survey_issue_rate, survey_like_rate, FeedbackRecord,
    PredictionRecord, ReportRow, SurveyTally, TiePolicy,
};
use crate::simulator::{oracle, read_events, EventRow, EVAL_FILE, ORACLE_FILE};
use crate::submit_model::{debiased_issue_rate, propensity};
use crate::survey::{Engagement, SurveyKind, ANSWER_LIKE};
use crate::survey_model::{MultiHeadNet, SurveyLabelSet, ANY_ISSUE};

/// Arm label of arm-independent survey-rate rows.
pub const RATES_ARM: &str = "survey";
pub const STRATUM_ALL: &str = "all";

fn value(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One evaluation-split survey show joined with its ground truth.
struct EvalShow<'a> {
    row: &'a EventRow,
    latent_answers: &'a [String],
    p_like: f64,
    p_inappropriate: f64,
    /// Submit-model estimate of P(ans | ss), clipped.
    propensity: Option<f64>,
}

/// Evaluates every arm of one seed. Survey heads are scored against the
/// latent answers of all evaluation shows, so the target is the whole shown
/// population rather than the self-selected submitters.
pub fn evaluate(config: &ExperimentConfig, layout: &SeedLayout) -> Result<Vec<ReportRow>> {
    let data = layout.data_dir();
    let rows = read_events(&data.join(EVAL_FILE))?;
    let index = oracle::read_oracle(&data.join(ORACLE_FILE))?;
    let needs_submit = config.wants(METRIC_STRATA) || config.wants(METRIC_RATES);
    let submit = if needs_submit { Some(load_submit_model(layout)?) } else { None };

    let mut shows = Vec::new();
    for row in rows.iter().filter(|r| r.survey.shown) {
        let o = oracle::lookup(&index, row)?;
        let propensity = match &submit {
            Some(net) => {
                let fv = net.config().features.encode(&row.user_features(), &row.item_features())?;
                Some(propensity(net, &fv, row.survey.kind, config.submit.clip_floor)?.clipped)
            }
            None => None,
        };
        shows.push(EvalShow {
            row,
            latent_answers: &o.latent_answers,
            p_like: o.p_like_ans,
            p_inappropriate: o.p_inappropriate,
            propensity,
        });
    }

    let mut out = Vec::new();
    if config.wants(METRIC_RATES) {
        out.extend(rate_rows(config, &shows)?);
    }
    for arm in &config.arms {
        let net = load_arm_model(layout, &arm.name)?;
        out.extend(arm_rows(config, &arm.name, &net, &rows, &shows)?);
    }
    Ok(out)
}

fn encode(net: &MultiHeadNet, row: &EventRow) -> Result<FeatureVector> {
    net.config().features.encode(&row.user_features(), &row.item_features())
}

fn arm_rows(
    config: &ExperimentConfig,
    arm: &str,
    net: &MultiHeadNet,
    rows: &[EventRow],
    shows: &[EvalShow],
) -> Result<Vec<ReportRow>> {
    let heads = &net.config().heads;
    let predictions: Vec<Vec<f64>> = shows
        .iter()
        .map(|s| net.predict(&encode(net, s.row)?))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (h, head) in heads.iter().enumerate() {
        let mut records = Vec::new();
        let mut props = Vec::new();
        for (s, p) in shows.iter().zip(&predictions) {
            if s.row.survey.kind != head.kind {
                continue;
            }
            let labels = SurveyLabelSet::from_response(heads, head.kind, s.latent_answers)?;
            records.push(PredictionRecord {
                user_id: s.row.user_id,
                item_id: s.row.item_id,
                head: head.name.clone(),
                p: p[h],
                y: labels.labels[h].expect("head applies to its own kind"),
                ipw_weight: 1.0,
            });
            props.push(s.propensity);
        }
        let n = records.len() as u64;
        if config.wants(METRIC_AUC) {
            out.push(ReportRow::new(arm, &head.name, METRIC_AUC, STRATUM_ALL, value(auc(&records))?, n));
        }
        if config.wants(METRIC_CALIBRATION) {
            out.push(ReportRow::new(
                arm,
                &head.name,
                METRIC_CALIBRATION,
                STRATUM_ALL,
                value(calibration(&records))?,
                n,
            ));
        }
        if config.wants(METRIC_STRATA) && !records.is_empty() {
            let props: Vec<f64> = props.into_iter().map(|p| p.expect("submit model loaded")).collect();
            for s in stratified_report(&records, &props, &config.strata)? {
                let n = s.n as u64;
                out.push(ReportRow::new(arm, &head.name, METRIC_AUC, &s.label, s.auc, n));
                out.push(ReportRow::new(arm, &head.name, METRIC_CALIBRATION, &s.label, s.calibration, n));
            }
        }
    }
    if config.wants(METRIC_UAUC) {
        // Every evaluation impression, shown a survey or not, against its engagement.
        let scores: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| net.predict(&encode(net, r)?))
            .collect::<Result<_>>()?;
        for (h, head) in heads.iter().enumerate() {
            let feedback = |invert: bool| -> Vec<FeedbackRecord> {
                rows.iter()
                    .zip(&scores)
                    .map(|(r, p)| FeedbackRecord {
                        user_id: r.user_id,
                        item_id: r.item_id,
                        score: if invert { 1.0 - p[h] } else { p[h] },
                        engagement: r.engagement,
                    })
                    .collect()
            };
            let n = rows.len() as u64;
            let nfb = nfb_uauc(&feedback(false), &Engagement::NEGATIVE_FEEDBACK, TiePolicy::Strict);
            out.push(ReportRow::new(arm, &head.name, "nfb_uauc", STRATUM_ALL, value(nfb)?, n));
            // Heads predict negative answers, so a low score signals positive feedback.
            let pfb = pfb_uauc(&feedback(true), &Engagement::POSITIVE_FEEDBACK, TiePolicy::Strict);
            out.push(ReportRow::new(arm, &head.name, "pfb_uauc", STRATUM_ALL, value(pfb)?, n));
        }
    }
    Ok(out)
}

/// An answer whose rate is reported.
enum Tracked<'a> {
    Like,
    AnyIssue,
    Issue(&'a str),
}

impl Tracked<'_> {
    fn name(&self) -> &str {
        match self {
            Tracked::Like => ANSWER_LIKE,
            Tracked::AnyIssue => "inappropriate",
            Tracked::Issue(o) => o,
        }
    }

    fn selected(&self, answers: &[String]) -> bool {
        match self {
            Tracked::Like => answers.iter().any(|a| a == ANSWER_LIKE),
            Tracked::AnyIssue => !answers.is_empty(),
            Tracked::Issue(o) => answers.iter().any(|a| a == o),
        }
    }

    fn raw_rate(&self, tally: &SurveyTally) -> Result<f64> {
        match self {
            Tracked::Like => survey_like_rate(tally),
            Tracked::AnyIssue => survey_issue_rate(tally, ANY_ISSUE),
            Tracked::Issue(o) => survey_issue_rate(tally, o),
        }
    }

    /// Oracle probability of this answer on a show, where the sidecar has it.
    fn truth(&self, show: &EvalShow) -> Option<f64> {
        match self {
            Tracked::Like => Some(show.p_like),
            Tracked::AnyIssue => Some(show.p_inappropriate),
            Tracked::Issue(_) => None,
        }
    }
}

/// Raw, submit-model-debiased and oracle population rates of each answer.
fn rate_rows(config: &ExperimentConfig, shows: &[EvalShow]) -> Result<Vec<ReportRow>> {
    let options: Vec<&str> = config.simulator.issues.options.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for kind in SurveyKind::ALL {
        let of_kind: Vec<&EvalShow> = shows.iter().filter(|s| s.row.survey.kind == kind).collect();
        let tracked: Vec<Tracked> = match kind {
            SurveyKind::Satisfaction => vec![Tracked::Like],
            SurveyKind::Inappropriate => std::iter::once(Tracked::AnyIssue)
                .chain(options.iter().map(|o| Tracked::Issue(o)))
                .collect(),
        };
        let known: &[&str] = if kind == SurveyKind::Satisfaction { &[] } else { &options };
        let mut tally = SurveyTally::new(kind, known);
        for s in &of_kind {
            tally.record(s.row.survey.submitted, &s.row.survey.answers)?;
        }
        for t in &tracked {
            let name = t.name();
            out.push(ReportRow::new(RATES_ARM, name, "raw_rate", STRATUM_ALL, value(t.raw_rate(&tally))?, tally.submits));
            let weighted: Vec<(bool, f64)> = of_kind
                .iter()
                .filter(|s| s.row.survey.submitted)
                .map(|s| (t.selected(&s.row.survey.answers), s.propensity.expect("submit model loaded")))
                .collect();
            let debiased = value(debiased_issue_rate(&weighted))?;
            out.push(ReportRow::new(RATES_ARM, name, "debiased_rate", STRATUM_ALL, debiased, tally.submits));
            let truth: Option<Vec<f64>> = of_kind.iter().map(|s| t.truth(s)).collect();
            let population = truth.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64);
            out.push(ReportRow::new(RATES_ARM, name, "population_rate", STRATUM_ALL, population, of_kind.len() as u64));
        }
    }
    Ok(out)
}
