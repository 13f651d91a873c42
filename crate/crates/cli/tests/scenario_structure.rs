//! Structural properties of the scenario layer: the attained-price curve
//! and its jump, regulation-scheme fingerprints on seeded random networks,
//! asset-relabeling invariance, and sweep determinism.

use clearnet_cli::config::{
    build_context, DemandSpec, GridSpec, NetworkSource, PaymentRuleSpec, ScenarioConfig,
    SolverSpec, SweepQuantity, SweepSpec, UtilitySpec,
};
use clearnet_cli::plots::{emit_plot_data, PlotKind, ResultsBundle};
use clearnet_cli::scenario::{run_sweep, sweep_csv};
use clearnet_core::behavior::BehaviorRule;
use clearnet_core::clearing::{
    clearing_holdings, equilibrium_set_scan, tatonnement, Direction, FirmPolicies, SolverParams,
};
use clearnet_core::market::{InverseDemand, ScalarCurve, ShockSpec};
use clearnet_core::network::{
    build_relative_liabilities, random_network, MultiLayerNetwork, PriceVector, RandomNetworkSpec,
};
use clearnet_core::payment::PaymentRule;
use ndarray::{Array2, Array3};

fn write_two_bank_config(dir: &std::path::Path, grid: GridSpec, scan: bool) -> std::path::PathBuf {
    let net_path = dir.join("two_bank.json");
    std::fs::write(
        &net_path,
        r#"{
  "schema_version": 1,
  "n": 2,
  "m": 2,
  "liabilities": [[[0,0],[0,0],[1,0]],[[0,0],[0,1],[0,0]]],
  "endowments": [[0,2],[2,0]]
}"#,
    )
    .unwrap();
    let config = ScenarioConfig {
        schema_version: 1,
        seed: 0,
        network: NetworkSource::File { path: net_path },
        inverse_demand: DemandSpec::CappedLinear {
            intercept: vec![1.0, 1.0],
            slope: vec![0.0, 0.375],
            min_price: vec![1.0, 0.05],
            max_price: vec![1.0, 5.0],
        },
        payment_rule: PaymentRuleSpec::default(),
        utility: UtilitySpec::default(),
        firm_overrides: Vec::new(),
        sweep: Some(SweepSpec {
            quantity: SweepQuantity::Q0,
            asset: 2,
            grid,
            scan,
            write_traces: false,
        }),
        solver: SolverSpec::default(),
    };
    let path = dir.join("scenario.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn ex51_network(seed: u64) -> MultiLayerNetwork<f64> {
    random_network(&RandomNetworkSpec {
        n_firms: 20,
        n_assets: 2,
        link_prob: 0.25,
        link_size: 1.0,
        society_obligation: 1.0,
        endowment_range: (0.0, 20.0),
        seed,
    })
    .unwrap()
}

fn arctan_market() -> InverseDemand<f64> {
    InverseDemand::symmetric_two_asset(ScalarCurve::Atan {
        amplitude: 3.0,
        shift: 2.0,
        impact: 1.0,
    })
    .unwrap()
}

#[test]
fn attained_curve_reproduces_the_jump() {
    let dir = tempfile::tempdir().unwrap();
    let count = 120;
    let config_path = write_two_bank_config(
        dir.path(),
        GridSpec::Linspace {
            from: 0.06,
            to: 0.999,
            count,
        },
        false,
    );
    let config = clearnet_cli::config::load_config(&config_path).unwrap();
    let ctx = build_context(&config).unwrap();
    let outcome = run_sweep(&ctx).unwrap();
    assert_eq!(outcome.summary.failures, 0);

    // Exactly one jump below q0 = 1, within one grid cell of the threshold.
    let cell = (0.999 - 0.06) / (count as f64 - 1.0);
    let threshold = 2.0 * (3.0f64 / 8.0).sqrt() - 3.0 / 8.0;
    let mut jumps = Vec::new();
    let records = &outcome.summary.records;
    for w in records.windows(2) {
        let a = w[0].q_star[1];
        let b = w[1].q_star[1];
        if (b - a).abs() > 0.25 {
            jumps.push(0.5 * (w[0].shock + w[1].shock));
        }
    }
    assert_eq!(jumps.len(), 1, "jumps at {jumps:?}");
    assert!(
        (jumps[0] - threshold).abs() <= cell,
        "jump at {} but the threshold is {threshold}",
        jumps[0]
    );

    // Within each branch region the attained price is nondecreasing in the
    // shock.
    for w in records.windows(2) {
        let a = w[0].q_star[1];
        let b = w[1].q_star[1];
        if (b - a).abs() <= 0.25 {
            assert!(
                b >= a - 1e-7,
                "attained price fell from {a} to {b} inside a branch region"
            );
        }
    }

    // The price-curve plot mirrors the sweep.
    let csv = emit_plot_data(&ResultsBundle::Sweep(&outcome), PlotKind::PriceCurve).unwrap();
    assert!(csv.starts_with("q0_2,q_star_2,branch_count\n"));
    assert_eq!(csv.lines().count(), count + 1);
}

#[test]
fn frictionless_sweep_is_constant() {
    let config = ScenarioConfig {
        schema_version: 1,
        seed: 5,
        network: NetworkSource::Random {
            n_firms: 6,
            n_assets: 2,
            link_prob: 0.3,
            link_size: 1.0,
            society_obligation: 1.0,
            endowment_low: 0.0,
            endowment_high: 8.0,
        },
        inverse_demand: DemandSpec::Constant {
            prices: vec![1.0, 1.0],
        },
        payment_rule: PaymentRuleSpec::default(),
        utility: UtilitySpec::default(),
        firm_overrides: Vec::new(),
        sweep: Some(SweepSpec {
            quantity: SweepQuantity::Gamma0,
            asset: 2,
            grid: GridSpec::Values {
                values: vec![-3.0, 0.0, 2.0, 10.0],
            },
            scan: false,
            write_traces: false,
        }),
        solver: SolverSpec::default(),
    };
    let ctx = build_context(&config).unwrap();
    let outcome = run_sweep(&ctx).unwrap();
    for record in &outcome.summary.records {
        assert_eq!(record.q_star, vec![1.0, 1.0]);
        assert!(record.converged);
    }
}

#[test]
fn regulation_schemes_leave_distinct_fingerprints() {
    // Priority regulation forces liquidation of the second currency and
    // drives its price near the lower bound; the proportional scheme admits
    // several equilibria on some realizations; and different schemes
    // default different firms.
    let params = SolverParams::default();
    let market = arctan_market();
    let (lo, _) = market.bounds();
    let shock = ShockSpec::zero(2);

    // Priority: attained price near the lower bound.
    let net = ex51_network(42);
    let rel = build_relative_liabilities(&net);
    let priority = FirmPolicies::uniform(PaymentRule::priority(2), BehaviorRule::min_trading(), 20);
    let attained_priority = tatonnement(&net, &rel, &priority, &market, &shock, &params)
        .unwrap()
        .result;
    assert!(
        attained_priority.prices.get(1) < lo[1] + 0.15,
        "priority equilibrium {} should sit near the bound {}",
        attained_priority.prices.get(1),
        lo[1]
    );

    // Proportional: at least three clearing prices for some realization.
    let net37 = ex51_network(37);
    let rel37 = build_relative_liabilities(&net37);
    let proportional =
        FirmPolicies::uniform(PaymentRule::proportional(), BehaviorRule::min_trading(), 20);
    let roots =
        equilibrium_set_scan(&net37, &rel37, &proportional, &market, &shock, &params).unwrap();
    assert!(
        roots.len() >= 3,
        "expected a realization with multiple equilibria, found {}",
        roots.len()
    );

    // Different schemes produce different default sets on the same network.
    let surplus = FirmPolicies::uniform(PaymentRule::surplus(), BehaviorRule::min_trading(), 20);
    let attained_surplus = tatonnement(&net, &rel, &surplus, &market, &shock, &params)
        .unwrap()
        .result;
    assert_ne!(
        attained_priority.defaults, attained_surplus.defaults,
        "priority and surplus schemes should not default the same firms here"
    );
}

#[test]
fn asset_relabeling_permutes_the_solution() {
    // Swap the two assets everywhere (network, prices, priority order) and
    // check the clearing solution swaps with them.
    let spec = RandomNetworkSpec {
        n_firms: 7,
        n_assets: 2,
        link_prob: 0.4,
        link_size: 1.0,
        society_obligation: 0.5,
        endowment_range: (0.0, 6.0),
        seed: 3,
    };
    let net: MultiLayerNetwork<f64> = random_network(&spec).unwrap();
    let n = net.n_firms();
    let mut liab = Array3::zeros((n, n + 1, 2));
    let mut endow = Array2::zeros((n, 2));
    for i in 0..n {
        for k in 0..2 {
            endow[[i, k]] = net.endowment(i, 1 - k);
            for j in 0..=n {
                liab[[i, j, k]] = net.liability(i, j, 1 - k);
            }
        }
    }
    let swapped = MultiLayerNetwork::new(liab, endow).unwrap();

    let rel = build_relative_liabilities(&net);
    let rel_swapped = build_relative_liabilities(&swapped);
    let params = SolverParams::default();
    let q = PriceVector::new(vec![1.0, 0.7]).unwrap();
    let q_swapped = PriceVector::new(vec![0.7, 1.0]).unwrap();
    let policies = FirmPolicies::uniform(
        PaymentRule::priority(1).with_order(vec![0, 1]),
        BehaviorRule::min_trading(),
        n,
    );
    let policies_swapped = FirmPolicies::uniform(
        PaymentRule::priority(1).with_order(vec![1, 0]),
        BehaviorRule::min_trading(),
        n,
    );
    let a = clearing_holdings(&net, &rel, &policies, &q, Direction::Greatest, &params).unwrap();
    let b = clearing_holdings(
        &swapped,
        &rel_swapped,
        &policies_swapped,
        &q_swapped,
        Direction::Greatest,
        &params,
    )
    .unwrap();
    for i in 0..n {
        for k in 0..2 {
            let diff = (a.holdings[[i, k]] - b.holdings[[i, 1 - k]]).abs();
            assert!(diff <= 1e-10, "relabeling changed the solution by {diff}");
        }
    }
    assert_eq!(a.defaults, b.defaults);
}

#[test]
fn sweeps_are_reproducible_and_plots_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_two_bank_config(
        dir.path(),
        GridSpec::Values {
            values: vec![0.5, 1.0, 2.0],
        },
        true,
    );
    let config = clearnet_cli::config::load_config(&config_path).unwrap();
    let ctx1 = build_context(&config).unwrap();
    let ctx2 = build_context(&config).unwrap();
    let out1 = run_sweep(&ctx1).unwrap();
    let out2 = run_sweep(&ctx2).unwrap();
    assert_eq!(
        sweep_csv(&out1),
        sweep_csv(&out2),
        "sweep CSV must be bit-identical"
    );
    assert_eq!(ctx1.config_hash, ctx2.config_hash);

    // Equilibrium-set plot has one row per root.
    let set_csv = emit_plot_data(&ResultsBundle::Sweep(&out1), PlotKind::EquilibriumSet).unwrap();
    let expected_rows: usize = out1
        .summary
        .records
        .iter()
        .map(|r| r.roots.as_ref().map_or(0, Vec::len))
        .sum();
    assert_eq!(set_csv.lines().count(), expected_rows + 1);

    // The triple region shows up in the branch counts.
    let triple = out1
        .summary
        .records
        .iter()
        .find(|r| (r.shock - 1.0).abs() < 1e-12)
        .unwrap();
    assert_eq!(triple.roots.as_ref().unwrap().len(), 3);

    // The trace kind renders a tâtonnement path.
    let net37 = ex51_network(37);
    let rel37 = build_relative_liabilities(&net37);
    let policies =
        FirmPolicies::uniform(PaymentRule::proportional(), BehaviorRule::min_trading(), 20);
    let taton = tatonnement(
        &net37,
        &rel37,
        &policies,
        &arctan_market(),
        &ShockSpec::zero(2),
        &SolverParams::default(),
    )
    .unwrap();
    let trace_text = emit_plot_data(&ResultsBundle::Trace(&taton.trace), PlotKind::Trace).unwrap();
    assert!(trace_text.starts_with("t,q_1,q_2\n"));
    assert_eq!(trace_text.lines().count(), taton.trace.samples.len() + 1);

    // Mismatched plot kinds are rejected; empty sweeps give header-only CSV.
    assert!(emit_plot_data(&ResultsBundle::Sweep(&out1), PlotKind::ImpactSweep).is_err());
    assert!("nonsense".parse::<PlotKind>().is_err());
    let empty = ResultsBundle::Impact(&[]);
    assert_eq!(
        emit_plot_data(&empty, PlotKind::ImpactSweep).unwrap(),
        "b,q_star_2,n_defaults\n"
    );
}
