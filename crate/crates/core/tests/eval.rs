mod common;

use common::{network, scenario};
use fddpg_core::ddpg::{ActorPolicy, DdpgConfig};
use fddpg_core::eval::{evaluate, export_csv, export_json, read_csv, EvalProtocol, EvalSummary, SummaryRow};
use fddpg_core::neural::MlpParams;
use fddpg_core::sim::EgoObservation;
use fddpg_core::Error;

fn zero_policy() -> ActorPolicy {
    let cfg = DdpgConfig::default();
    ActorPolicy::new(
        MlpParams::zeros(&cfg.actor_sizes(), &cfg.actor_activations()).unwrap(),
        cfg,
    )
    .unwrap()
}

fn flat_out(_: &EgoObservation) -> f64 {
    2.6
}

#[test]
fn zero_actor_on_empty_map_times_out_everywhere() {
    let protocol = EvalProtocol::default();
    let s = evaluate(
        "zero",
        &zero_policy(),
        &network("empty.net"),
        &scenario("empty.toml"),
        &protocol,
    )
    .unwrap();
    assert_eq!(s.distances.len(), 5);
    for d in &s.distances {
        assert_eq!(d.episodes, 20);
        assert_eq!(d.collisions, 0);
        assert_eq!(d.timeouts, 20);
        assert_eq!(d.success_rate, 0.0);
        assert_eq!(d.mean_travel_delay_s, None);
        assert_eq!(d.mean_avg_speed_mps, 0.0);
    }
}

#[test]
fn flat_out_reaches_ten_metres() {
    let protocol = EvalProtocol {
        distances_m: vec![10.0],
        ..EvalProtocol::default()
    };
    let s = evaluate(
        "max",
        &(flat_out as fn(&EgoObservation) -> f64),
        &network("empty.net"),
        &scenario("empty.toml"),
        &protocol,
    )
    .unwrap();
    let d = &s.distances[0];
    assert_eq!(d.success_rate, 1.0);
    // 2.6 then 7.8 m covered; 7.8 is within the 5 m tolerance of 10 m, so two steps.
    // Free-flow time over 7.8 m at 20 m/s is 0.39 s.
    assert!((d.mean_travel_delay_s.unwrap() - (2.0 - 7.8 / 20.0)).abs() < 1e-12);
    assert!((d.mean_avg_speed_mps - 3.9).abs() < 1e-12);
}

#[test]
fn counts_partition_episodes_on_grid() {
    let protocol = EvalProtocol {
        episodes: 6,
        ..EvalProtocol::default()
    };
    let s = evaluate(
        "max",
        &(flat_out as fn(&EgoObservation) -> f64),
        &network("grid.net"),
        &scenario("grid.toml"),
        &protocol,
    )
    .unwrap();
    for d in &s.distances {
        assert_eq!(d.collisions + d.successes + d.timeouts, d.episodes);
        assert!((0.0..=1.0).contains(&d.success_rate));
        if let Some(delay) = d.mean_travel_delay_s {
            assert!(delay >= -1e-9);
        }
    }
}

#[test]
fn evaluation_is_pure_and_order_free() {
    let protocol = EvalProtocol {
        episodes: 5,
        ..EvalProtocol::default()
    };
    let policy = ActorPolicy::new(DdpgConfig::default().init_actor(7).unwrap(), DdpgConfig::default()).unwrap();
    let before = policy.clone();
    let net = network("grid.net");
    let template = scenario("grid.toml");
    let a = evaluate("p", &policy, &net, &template, &protocol).unwrap();
    let b = evaluate("p", &policy, &net, &template, &protocol).unwrap();
    let serial = EvalProtocol {
        parallel: false,
        ..protocol
    };
    let c = evaluate("p", &policy, &net, &template, &serial).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(policy, before);
}

#[test]
fn infeasible_distance_fails_before_rolling_out() {
    let protocol = EvalProtocol {
        distances_m: vec![10.0, 1000.0],
        ..EvalProtocol::default()
    };
    let err = evaluate(
        "z",
        &zero_policy(),
        &network("grid.net"),
        &scenario("grid.toml"),
        &protocol,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InfeasibleDistance { max, .. } if max == 300.0));
    assert!(err.to_string().contains("300"));
}

fn sample_summary() -> EvalSummary {
    let protocol = EvalProtocol {
        episodes: 3,
        ..EvalProtocol::default()
    };
    evaluate(
        "flat,\"out\"",
        &(flat_out as fn(&EgoObservation) -> f64),
        &network("grid.net"),
        &scenario("grid.toml"),
        &protocol,
    )
    .unwrap()
}

#[test]
fn csv_layout_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    export_csv(&[], &empty).unwrap();
    assert_eq!(
        std::fs::read_to_string(&empty).unwrap(),
        "policy_id,distance_m,episodes,collisions,mean_travel_delay_s,mean_avg_speed_mps,success_rate\n"
    );

    let summary = sample_summary();
    let path = dir.path().join("eval.csv");
    export_csv(std::slice::from_ref(&summary), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 6);
    let rows = read_csv(&path).unwrap();
    let expected: Vec<SummaryRow> = summary.rows().collect();
    assert_eq!(rows, expected);

    let json = dir.path().join("eval.json");
    export_json(&[summary], &json).unwrap();
    let back: Vec<SummaryRow> = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(back, expected);
}
