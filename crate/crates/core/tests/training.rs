use pinn_core::loss::LossWeights;
use pinn_core::network::{init_network, Architecture};
use pinn_core::optimizer::{AdamState, OptimizerConfig};
use pinn_core::sampling::SamplingMode;
use pinn_core::trainer::{
    preset, train_forward, train_inverse, Checkpoint, CollocationConfig, TrainConfig, Trainer,
};
use pinn_core::transport::{BoundaryCondition, ResidualSpec};
use pinn_core::PinnError;

fn small_forward(epochs: usize) -> TrainConfig {
    TrainConfig {
        architecture: Architecture::mlp(&[16, 16]).unwrap(),
        collocation: CollocationConfig::Sampled {
            n_interior: 40,
            n_boundary: 20,
            n_initial: 10,
            mode: SamplingMode::EquispacedGrid,
            observation_grid: None,
        },
        epochs,
        log_every: 10,
        ..preset("forward-small").unwrap()
    }
}

fn small_inverse(epochs: usize) -> TrainConfig {
    TrainConfig {
        architecture: Architecture::mlp(&[16, 16]).unwrap(),
        collocation: CollocationConfig::Sampled {
            n_interior: 40,
            n_boundary: 20,
            n_initial: 10,
            mode: SamplingMode::EquispacedGrid,
            observation_grid: Some([5, 5]),
        },
        epochs,
        log_every: 10,
        coefficient_log_every: 7,
        ..preset("inverse-tutorial").unwrap()
    }
}

fn csv_bytes(config: TrainConfig) -> Vec<u8> {
    let out = train_forward(config).unwrap();
    let mut buf = Vec::new();
    out.log.write_csv(&mut buf).unwrap();
    buf
}

#[test]
fn identical_configs_give_identical_logs() {
    let a = csv_bytes(small_forward(60));
    let b = csv_bytes(small_forward(60));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "epoch,total,residual,boundary,initial,observation,rel_l2,coefficient,seconds\n"
    ));
    assert!(!text.contains('\r'));
    let c = csv_bytes(TrainConfig {
        seed: 2,
        ..small_forward(60)
    });
    assert_ne!(text.as_bytes(), c.as_slice());
}

#[test]
fn single_epoch_is_one_adam_step() {
    let config = small_forward(1);
    let trainer = Trainer::new(config.clone()).unwrap();
    let theta0 = trainer.theta().to_vec();
    let colloc = config.build_collocation().unwrap();
    let loss = pinn_core::loss::PinnLoss::assemble(
        &config.architecture,
        &config.residual,
        &pinn_core::transport::ConditionSpec::new(config.boundary),
        &config.domain,
        &colloc,
        &config.weights,
    )
    .unwrap();
    let (_, grad) = loss.value_and_gradient(&theta0).unwrap();
    let (_, expected) = pinn_core::optimizer::adam_step(
        &AdamState::new(theta0.len()),
        &theta0,
        &grad,
        &config.optimizer,
    )
    .unwrap();
    let out = trainer.run().unwrap();
    assert_eq!(out.params.as_flat(), expected.as_slice());
    assert_eq!(out.log.rows.len(), 2);
}

#[test]
fn checkpoint_resume_continues_the_same_trajectory() {
    for config in [small_forward(40), small_inverse(40)] {
        let straight = Trainer::new(config.clone()).unwrap().run().unwrap();

        let mut first = Trainer::new(config.clone()).unwrap();
        first.run_to(17).unwrap();
        let mut bytes = Vec::new();
        first.checkpoint().write(&mut bytes).unwrap();
        let restored = Checkpoint::read(bytes.as_slice()).unwrap();
        let resumed = Trainer::resume(config.clone(), &restored)
            .unwrap()
            .run()
            .unwrap();

        assert_eq!(straight.params, resumed.params);
        assert_eq!(straight.coefficient, resumed.coefficient);
        let tail: Vec<_> = straight
            .log
            .rows
            .iter()
            .filter(|r| r.epoch >= 17)
            .cloned()
            .collect();
        assert_eq!(tail, resumed.log.rows);
    }
}

#[test]
fn checkpoint_from_other_config_is_refused() {
    let mut t = Trainer::new(small_forward(5)).unwrap();
    t.run_to(2).unwrap();
    let ck = t.checkpoint();
    let other = TrainConfig {
        seed: 99,
        ..small_forward(5)
    };
    assert!(matches!(
        Trainer::resume(other, &ck),
        Err(PinnError::Checkpoint(_))
    ));
    let longer = small_forward(50);
    assert!(Trainer::resume(longer, &ck).is_ok());
}

#[test]
fn forward_training_reduces_error() {
    let out = train_forward(TrainConfig {
        architecture: Architecture::mlp(&[64, 64]).unwrap(),
        log_every: 100,
        ..small_forward(2000)
    })
    .unwrap();
    let first = &out.log.rows[0];
    let last = out.final_row();
    assert!(
        last.rel_l2 < first.rel_l2,
        "{} vs {}",
        last.rel_l2,
        first.rel_l2
    );
    assert!(out.log.rows.windows(2).all(|w| w[0].epoch < w[1].epoch));
    assert!(out
        .log
        .rows
        .iter()
        .all(|r| r.loss.is_finite() && r.rel_l2.is_finite()));
    // Trend: best loss late in the run beats best loss early on.
    let n = out.log.rows.len();
    let tenth = (n / 10).max(1);
    let min = |rows: &[pinn_core::trainer::LogRow]| {
        rows.iter()
            .map(|r| r.loss.total)
            .fold(f64::INFINITY, f64::min)
    };
    assert!(min(&out.log.rows[n - tenth..]) < min(&out.log.rows[..tenth]));
}

#[test]
fn inverse_trace_follows_cadence() {
    let out = train_inverse(small_inverse(20)).unwrap();
    let epochs: Vec<_> = out.coefficient_trace.iter().map(|s| s.epoch).collect();
    assert_eq!(epochs, vec![0, 7, 14, 20]);
    assert_eq!(out.coefficient_trace[0].value, 0.0);
    assert_eq!(
        out.coefficient_trace.last().unwrap().value,
        out.coefficient.unwrap()
    );
    assert!(out.log.rows.iter().all(|r| r.coefficient.is_some()));
}

#[test]
fn inverse_requires_observations() {
    let mut config = small_inverse(5);
    if let CollocationConfig::Sampled {
        observation_grid, ..
    } = &mut config.collocation
    {
        *observation_grid = None;
    }
    config.weights = LossWeights {
        w_obs: 0.0,
        ..LossWeights::default()
    };
    assert!(train_inverse(config).is_err());
}

#[test]
fn coefficient_started_at_truth_stays_near_truth() {
    // Fit the network with the true speed first, then release the speed.
    let pretrain = TrainConfig {
        architecture: Architecture::mlp(&[32, 32]).unwrap(),
        collocation: CollocationConfig::Sampled {
            n_interior: 40,
            n_boundary: 20,
            n_initial: 10,
            mode: SamplingMode::EquispacedGrid,
            observation_grid: Some([10, 10]),
        },
        boundary: BoundaryCondition::DirichletExact,
        weights: LossWeights::default(),
        optimizer: OptimizerConfig::adam(0.01),
        log_every: 500,
        ..small_forward(3000)
    };
    let fitted = Trainer::new(pretrain.clone()).unwrap().run().unwrap();
    let probe = TrainConfig {
        residual: ResidualSpec::Trainable(3.0),
        optimizer: OptimizerConfig::adam(0.001),
        epochs: 1000,
        coefficient_log_every: 10,
        ..pretrain
    };
    let out = Trainer::with_params(probe, fitted.params)
        .unwrap()
        .run()
        .unwrap();
    for s in &out.coefficient_trace {
        assert!(
            (s.value - 3.0).abs() <= 0.05,
            "C = {} at epoch {}",
            s.value,
            s.epoch
        );
    }
}

#[test]
fn starting_parameters_must_match_architecture() {
    let config = small_forward(3);
    let wrong = init_network(&Architecture::mlp(&[3]).unwrap(), config.init, 0).unwrap();
    assert!(Trainer::with_params(config, wrong).is_err());
}
