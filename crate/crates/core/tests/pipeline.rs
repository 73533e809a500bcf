use rankaudit::audit::{build_report, kendall_tau, MethodOutput, ReportHeader, TauVariant, BASELINE};
use rankaudit::dataset::{FeatureColumn, SplitRole};
use rankaudit::decide::{decide, equalize_rates, DecisionPolicy};
use rankaudit::mitigate::{
    apply_mixing, apply_reject_option, apply_thresholds, disparate_impact_remove, fit_equalized_odds_post,
    fit_threshold_optimizer, reject_option_classify,
};
use rankaudit::scorer::{self, ScorerConfig};
use rankaudit::synthetic::{generate, SyntheticConfig};
use rankaudit::{audit, registry, split, Dataset, Group, ScoreSet};

fn fixture(name: &str, rows: usize) -> Dataset {
    let spec = registry::get(name).unwrap();
    generate(
        &spec,
        &SyntheticConfig {
            rows,
            seed: 11,
            ..SyntheticConfig::default()
        },
    )
    .unwrap()
}

fn quick_scorer() -> ScorerConfig {
    ScorerConfig {
        epochs: 150,
        ..ScorerConfig::default()
    }
}

#[test]
fn exported_csv_ingests_back_to_the_same_dataset() {
    for name in registry::names() {
        let d = fixture(name, 300);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        d.export_path(&path).unwrap();
        let back = rankaudit::ingest(&path, d.spec()).unwrap();
        assert_eq!(back.len(), d.len(), "{name}");
        assert_eq!(back.groups(), d.groups(), "{name}");
        assert_eq!(back.labels(), d.labels(), "{name}");
        assert_eq!(back.base_rate(), d.base_rate(), "{name}");
    }
}

#[test]
fn synthetic_fixtures_hit_the_registered_base_rates() {
    for spec in registry::all() {
        let d = fixture(&spec.name, 10_000);
        let check = rankaudit::verify_base_rate(&d);
        assert_eq!(check.matches_to_4_decimals, Some(true), "{} rate {}", spec.name, check.rate);
    }
}

#[test]
fn postprocessors_leave_every_ranking_and_auc_untouched() {
    for name in registry::names() {
        let d = fixture(name, 2500);
        let s = split(d.len(), (0.6, 0.2, 0.2), 5).unwrap();
        let model = scorer::fit(&d, &s, &quick_scorer()).unwrap();
        let val = model.score_split(&d, &s, SplitRole::Validation, BASELINE).unwrap();
        let test = model.score_split(&d, &s, SplitRole::Test, BASELINE).unwrap();

        let th = fit_threshold_optimizer(&val, &d, &s.validation_ids, None).unwrap();
        let to = apply_thresholds(&th, &test, &d, "TO").unwrap();
        let (roc_fit, _) = reject_option_classify(&val, &d, &s.validation_ids, 0.05).unwrap();
        let roc = apply_reject_option(&roc_fit.region, &test, &d, "ROC").unwrap();
        let half = DecisionPolicy::FixedThreshold { t: 0.5 };
        let eop_fit = fit_equalized_odds_post(&decide(&val, &d, &half).unwrap(), &d, &s.validation_ids, 3).unwrap();
        let eop = apply_mixing(&eop_fit.rates, &decide(&test, &d, &half).unwrap(), &d, &s.test_ids, "EOP").unwrap();

        let methods = vec![
            MethodOutput::with_decisions("TO", test.clone().renamed("TO"), to),
            MethodOutput::with_decisions("ROC", test.clone().renamed("ROC"), roc),
            MethodOutput::with_decisions("EOP", test.clone().renamed("EOP"), eop),
        ];
        let r = build_report(&d, &test, &methods, &half, TauVariant::TauB, ReportHeader::default()).unwrap();
        let base = r.row(BASELINE).unwrap();
        for m in ["TO", "ROC", "EOP"] {
            let row = r.row(m).unwrap();
            assert_eq!(row.auc.to_bits(), base.auc.to_bits(), "{name} {m}");
            assert_eq!(row.auc_protected.to_bits(), base.auc_protected.to_bits());
            assert_eq!(row.auc_privileged.to_bits(), base.auc_privileged.to_bits());
            let t = r.tau_row(m).unwrap();
            assert_eq!((t.tau_overall, t.tau_protected, t.tau_privileged), (1.0, 1.0, 1.0), "{name} {m}");
        }
    }
}

fn numeric(d: &Dataset, name: &str) -> Vec<f64> {
    match d.column(name) {
        Some(FeatureColumn::Numeric { values, .. }) => values.clone(),
        _ => panic!("{name} is not numeric"),
    }
}

fn group_values(d: &Dataset, values: &[f64], g: Group) -> Vec<f64> {
    values
        .iter()
        .zip(d.groups())
        .filter(|(_, &gg)| gg == g)
        .map(|(&v, _)| v)
        .collect()
}

#[test]
fn repair_keeps_within_group_order_on_every_fixture() {
    for name in registry::names() {
        let d = fixture(name, 800);
        for lambda in [0.0, 0.3, 0.7, 1.0] {
            let r = disparate_impact_remove(&d, lambda, &[]).unwrap();
            for col in &r.repaired_columns {
                let before = numeric(&d, col);
                let after = numeric(&r.dataset, col);
                if lambda == 0.0 {
                    assert_eq!(before, after, "{name} {col}");
                }
                for g in Group::BOTH {
                    let tau = kendall_tau(
                        &group_values(&d, &before, g),
                        &group_values(&d, &after, g),
                        TauVariant::TauB,
                    )
                    .unwrap();
                    assert_eq!(tau, 1.0, "{name} {col} {g:?} lambda {lambda}");
                }
            }
        }
    }
}

#[test]
fn equal_group_rates_hold_on_every_fixture() {
    for name in registry::names() {
        let d = fixture(name, 1500);
        let ids: Vec<usize> = (0..d.len()).collect();
        let scores = ScoreSet::new("s", ids.clone(), (0..d.len()).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect(), None).unwrap();
        let (np, nq) = d.group_sizes();
        let bound = 1.0 / np.min(nq) as f64;
        for r in [0.05, 0.2, 0.5, 0.77] {
            let dec = equalize_rates(&scores, &d, r).unwrap();
            assert!(audit::spd(&dec, &d).unwrap().abs() <= bound, "{name} r={r}");
            let th = fit_threshold_optimizer(&scores, &d, &ids, Some(r)).unwrap();
            let dec = apply_thresholds(&th, &scores, &d, "TO").unwrap();
            assert!(audit::spd(&dec, &d).unwrap().abs() <= bound, "{name} TO r={r}");
        }
    }
}
