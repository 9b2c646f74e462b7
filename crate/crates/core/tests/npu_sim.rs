// SPDX-License-Identifier: Apache-2.0

mod common;

use common::reference::{self, Perturb};
use npu_sdc::npu::{
    build_npu, BlockId, CrashReason, FaultSite, Layer, NpuConfig, NpuError, OutcomeKind, Phase,
    Session, Shape, Workload,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn session(rows: u32, cols: u32, w: &Workload) -> Session {
    let model = build_npu(NpuConfig::new(rows, cols, 4096)).unwrap();
    Session::new(&model, w).unwrap()
}

fn tiny_cnn() -> Workload {
    Workload::preset("tiny-cnn", 42, 16).unwrap()
}

#[test]
fn golden_is_deterministic() {
    let w = tiny_cnn();
    let model = build_npu(NpuConfig::new(2, 2, 4096)).unwrap();
    let a = model.run_golden(&w).unwrap();
    let b = model.run_golden(&w).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.top1_labels.len(), 16);
}

#[test]
fn tiny_cnn_matches_software_reference() {
    let w = tiny_cnn();
    let expected = reference::labels(&w, None);
    let s = session(2, 2, &w);
    assert_eq!(s.golden().top1_labels, expected);
    // labels are not all the same, so the comparison is informative
    assert!(expected.iter().any(|&l| l != expected[0]));
}

#[test]
fn reference_agreement_across_configs_and_seeds() {
    for (rows, cols) in [(1, 1), (1, 3), (2, 2), (3, 2), (4, 4)] {
        for seed in 0..4 {
            let w = Workload::preset("tiny-cnn", seed, 6).unwrap();
            let s = session(rows, cols, &w);
            assert_eq!(
                s.golden().top1_labels,
                reference::labels(&w, None),
                "mac {rows}x{cols} seed {seed}"
            );
        }
    }
}

#[test]
fn deeper_network_matches_reference() {
    let text = r#"
        seed = 7
        num_inputs = 5
        input_shape = [2, 3, 5]
        [[layers]]
        kind = "conv3x3"
        out_channels = 3
        [[layers]]
        kind = "relu"
        [[layers]]
        kind = "conv3x3"
        out_channels = 2
        [[layers]]
        kind = "dense"
        out_features = 6
        [[layers]]
        kind = "relu"
        [[layers]]
        kind = "dense"
        out_features = 5
        [[layers]]
        kind = "argmax"
    "#;
    let w = Workload::from_toml_str(text).unwrap();
    let s = session(2, 3, &w);
    assert_eq!(s.golden().top1_labels, reference::labels(&w, None));
}

#[test]
fn zero_weight_network_picks_label_zero() {
    let w = Workload::preset("zero-weight", 3, 8).unwrap();
    let s = session(2, 2, &w);
    assert_eq!(s.golden().top1_labels, vec![0; 8]);
}

#[test]
fn identity_dense_returns_argmax_of_input() {
    let n = 6;
    let mut weights = vec![0i8; n * n];
    for i in 0..n {
        weights[i * n + i] = 64;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs: Vec<Vec<i8>> = (0..10)
        .map(|_| (0..n).map(|_| rng.gen_range(-128i8..=127)).collect())
        .collect();
    let w = Workload {
        input_shape: Shape::new(n as u32, 1, 1),
        layers: vec![
            Layer::dense(n as u32, weights, vec![0; n], 6),
            Layer::argmax(),
        ],
        inputs: inputs.clone(),
        seed: 0,
    };
    let s = session(2, 2, &w);
    let expected: Vec<u16> = inputs.iter().map(|x| reference::argmax(x)).collect();
    assert_eq!(s.golden().top1_labels, expected);
}

#[test]
fn shape_and_buffer_errors() {
    let model = build_npu(NpuConfig::new(2, 2, 64)).unwrap();
    assert!(matches!(model.run_golden(&tiny_cnn()), Err(NpuError::Shape(_))));

    let mut w = tiny_cnn();
    w.layers[2].bias.pop();
    let model = build_npu(NpuConfig::new(2, 2, 4096)).unwrap();
    assert!(matches!(model.run_golden(&w), Err(NpuError::Shape(_))));
}

#[test]
fn fault_space_is_bits_times_cycles() {
    let w = tiny_cnn();
    let s = session(2, 2, &w);
    let space = s.fault_space();
    let cycles = s.golden().cycle_count;
    for b in BlockId::ALL {
        assert_eq!(space.population(b), s.model().block_bits(b) * cycles);
    }
    assert_eq!(space.total(), space.iter().map(|(_, n)| n).sum::<u64>());
    assert_eq!(space.total(), s.model().total_bits() * cycles);
}

/// Enumerated once from the tiny-cnn (seed 42, 16 inputs) golden run on a 2x2 array.
#[test]
fn tiny_cnn_fault_space_fixture() {
    let s = session(2, 2, &tiny_cnn());
    let space = s.fault_space();
    let table: Vec<(BlockId, u64)> = space.iter().collect();
    let cycles = 5_568;
    assert_eq!(s.golden().cycle_count, cycles);
    assert_eq!(
        table,
        vec![
            (BlockId::Ao, 72 * cycles),
            (BlockId::Dma, 112 * cycles),
            (BlockId::Mac, 192 * cycles),
            (BlockId::Reg, 256 * cycles),
            (BlockId::Tsu, 56 * cycles),
            (BlockId::Wd, 56 * cycles),
        ]
    );
    assert_eq!(space.total(), 744 * cycles);
}

#[test]
fn mac_population_scales_linearly_with_cells() {
    let w = Workload::preset("toy-dense", 1, 2).unwrap();
    for (rows, cols) in [(1, 1), (1, 2), (2, 2), (2, 3)] {
        let s = session(rows, cols, &w);
        let space = s.fault_space();
        assert_eq!(
            space.population(BlockId::Mac),
            48 * u64::from(rows * cols) * s.golden().cycle_count
        );
    }
}

#[test]
fn control_run_reproduces_golden() {
    let s = session(2, 2, &tiny_cnn());
    let control = s.run_control();
    assert_eq!(control.kind, OutcomeKind::Masked);
    assert_eq!(control.sdc_fraction(), 0.0);
    assert_eq!(&s.replay().unwrap(), s.golden());
}

#[test]
fn flips_after_completion_are_masked() {
    let s = session(2, 2, &tiny_cnn());
    let last = s.golden().cycle_count - 1;
    for (i, reg) in s.model().registers().iter().enumerate() {
        for bit in [0, reg.width - 1] {
            let site = FaultSite {
                block: reg.block,
                register: i,
                bit,
                cycle: last,
            };
            assert_eq!(s.inject(&site).unwrap().kind, OutcomeKind::Masked, "{}", reg.name);
        }
    }
}

#[test]
fn reserved_config_registers_are_dead_state() {
    let s = session(2, 2, &tiny_cnn());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["cfg[6]", "cfg[7]"] {
        let reg = s.model().register_index(BlockId::Reg, name).unwrap();
        for _ in 0..50 {
            let site = FaultSite {
                block: BlockId::Reg,
                register: reg,
                bit: rng.gen_range(0..32),
                cycle: rng.gen_range(0..s.golden().cycle_count),
            };
            assert_eq!(s.inject(&site).unwrap().kind, OutcomeKind::Masked);
        }
    }
}

#[test]
fn fsm_upsets_are_illegal_state_crashes() {
    let s = session(2, 2, &tiny_cnn());
    let reg = s.model().register_index(BlockId::Tsu, "fsm_state").unwrap();
    for cycle in [0, 100, 2_000, s.golden().cycle_count - 2] {
        for bit in 0..8 {
            let site = FaultSite {
                block: BlockId::Tsu,
                register: reg,
                bit,
                cycle,
            };
            let out = s.inject(&site).unwrap();
            assert_eq!(out.kind, OutcomeKind::Crash);
            assert_eq!(out.crash_reason, Some(CrashReason::IllegalState));
            assert_eq!(out.sdc_fraction(), 0.0);
        }
    }
}

/// Flipping bit 31 of an accumulator adds 2^31 modulo 2^32 to the partial sum,
/// whatever the partial sum is, so the reference can apply the same
/// perturbation to the finished accumulator.
#[test]
fn mac_msb_flip_matches_perturbed_reference() {
    let w = tiny_cnn();
    let s = session(2, 2, &w);
    let trace = s.trace();
    let last_op = trace.iter().map(|t| t.op).max().unwrap();
    let dense_layer = w
        .layers
        .iter()
        .rposition(|l| l.kind.is_compute())
        .unwrap();
    let acc0 = s.model().register_index(BlockId::Mac, "acc[0]").unwrap();

    let mut checked = 0;
    let mut sdc = 0;
    for t in trace
        .iter()
        .filter(|t| t.op == last_op && t.phase == Phase::Compute && t.row == 10)
    {
        let site = FaultSite {
            block: BlockId::Mac,
            register: acc0,
            bit: 31,
            cycle: t.cycle,
        };
        let out = s.inject(&site).unwrap();
        let perturb = Perturb {
            layer: dense_layer,
            output: (t.chan + t.col) as usize,
            delta: i32::MIN,
        };
        let expected = reference::labels(&w, Some((t.image, perturb)));
        let mismatches = expected
            .iter()
            .zip(&s.golden().top1_labels)
            .filter(|(a, b)| a != b)
            .count() as u32;
        assert_ne!(out.kind, OutcomeKind::Crash);
        assert_eq!(out.mismatches, mismatches, "cycle {}", t.cycle);
        checked += 1;
        sdc += u32::from(out.is_sdc());
    }
    assert_eq!(checked, 16 * 4);
    assert!(sdc > 0, "some MSB flips must change a label");
}

#[test]
fn out_of_range_sites_are_domain_errors() {
    let w = tiny_cnn();
    let s = session(2, 2, &w);
    let model = s.model();
    let golden = s.golden();
    let reg = model.register_index(BlockId::Wd, "weight_latch").unwrap();
    let bad_bit = FaultSite {
        block: BlockId::Wd,
        register: reg,
        bit: 8,
        cycle: 0,
    };
    assert!(matches!(s.inject(&bad_bit), Err(NpuError::SiteOutOfRange(_))));
    let bad_cycle = FaultSite {
        bit: 0,
        cycle: golden.cycle_count,
        ..bad_bit
    };
    assert!(matches!(s.inject(&bad_cycle), Err(NpuError::SiteOutOfRange(_))));
    let wrong_block = FaultSite {
        block: BlockId::Ao,
        ..bad_bit
    };
    assert!(matches!(s.inject(&wrong_block), Err(NpuError::SiteOutOfRange(_))));
    assert!(model.site(BlockId::Dma, "nope", 0, 0, golden).is_err());
    let ok = model.site(BlockId::Dma, "src_addr", 3, 10, golden).unwrap();
    assert!(model.run_injected(&w, &ok, golden).is_ok());
}

#[test]
fn random_injections_are_deterministic_and_bounded() {
    let s = session(2, 2, &tiny_cnn());
    let space = s.fault_space();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut kinds = [0usize; 3];
    for _ in 0..400 {
        let block = BlockId::ALL[rng.gen_range(0..6)];
        let idx = rng.gen_range(0..space.population(block));
        let site = s.model().site_at(block, idx).unwrap();
        let a = s.inject(&site).unwrap();
        let b = s.inject(&site).unwrap();
        assert_eq!(a, b);
        match a.kind {
            OutcomeKind::Masked => assert_eq!(a.mismatches, 0),
            OutcomeKind::Sdc => assert!(a.mismatches > 0 && a.crash_reason.is_none()),
            OutcomeKind::Crash => assert!(a.crash_reason.is_some() && a.mismatches == 0),
        }
        kinds[a.kind as usize] += 1;
    }
    // all three classes show up on a realistic sample
    assert!(kinds.iter().all(|&k| k > 0), "{kinds:?}");
}

#[test]
fn sessions_are_thread_safe() {
    fn assert_sync<T: Send + Sync>() {}
    assert_sync::<Session>();
}
