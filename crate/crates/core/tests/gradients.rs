use mineroi_core::nn::gradcheck::{check, GroupError};
use mineroi_core::nn::{Classifier, LstmConfig, LstmNet, MineRoiNet, ModelConfig, Params, SpectralMode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn input(seed: u64, l: usize, f: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((l, f), || rng.random_range(0.0..1.0))
}

// Moves the spectral weights away from the identity so their gradients are generic.
fn perturb_spectral(p: &mut Params, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in ["spectral.re", "spectral.im"] {
        let id = p.layout().find(name).unwrap();
        for v in p.slice_mut(id) {
            *v += rng.random_range(-0.3..0.3);
        }
    }
}

fn assert_groups(label: &str, groups: &[GroupError]) {
    for g in groups {
        assert!(
            g.rel_error < TOL,
            "{label}: {} rel error {:.3e} (max abs {:.3e}, norm {:.3e})",
            g.name,
            g.rel_error,
            g.max_abs_diff,
            g.norm
        );
        // A shared key shift cancels inside each softmax row; in literal mode
        // the imaginary weight vanishes under the real part.
        let structurally_zero = g.name.ends_with("attn.bk") || (label == "literal" && g.name == "spectral.im");
        if structurally_zero {
            assert!(g.norm < 1e-12, "{label}: {} should have no gradient, norm {:.3e}", g.name, g.norm);
        } else {
            assert!(g.norm > 1e-8, "{label}: {} has a vanishing gradient", g.name);
        }
    }
}

#[test]
fn mineroi_per_bin() {
    let net = MineRoiNet::new(ModelConfig::tiny()).unwrap();
    let mut p = net.init_seeded(1);
    perturb_spectral(&mut p, 2);
    let groups = check(&net, &p, input(3, 8, 3).view(), [0.7, -1.1, 0.4], None, 1e-5).unwrap();
    assert_groups("per_bin", &groups);
}

#[test]
fn mineroi_literal_mode() {
    let cfg = ModelConfig {
        spectral_mode: SpectralMode::Literal,
        ..ModelConfig::tiny()
    };
    let net = MineRoiNet::new(cfg).unwrap();
    let mut p = net.init_seeded(4);
    perturb_spectral(&mut p, 5);
    let groups = check(&net, &p, input(6, 8, 3).view(), [-0.3, 0.9, 0.5], None, 1e-5).unwrap();
    assert_groups("literal", &groups);
}

#[test]
fn mineroi_with_dropout_masks() {
    let cfg = ModelConfig {
        dropout: 0.2,
        ..ModelConfig::tiny()
    };
    let net = MineRoiNet::new(cfg).unwrap();
    let mut p = net.init_seeded(7);
    perturb_spectral(&mut p, 8);
    let groups = check(&net, &p, input(9, 8, 3).view(), [1.0, -0.5, 0.2], Some(10), 1e-5).unwrap();
    assert_groups("dropout", &groups);
}

#[test]
fn lstm_tiny() {
    let net = LstmNet::new(LstmConfig::tiny()).unwrap();
    let mut p = net.init_seeded(11);
    perturb_spectral(&mut p, 12);
    let groups = check(&net, &p, input(13, 8, 3).view(), [0.6, 0.1, -0.8], None, 1e-5).unwrap();
    assert_groups("lstm", &groups);
}

#[test]
fn lstm_with_interlayer_dropout() {
    let cfg = LstmConfig {
        dropout: 0.3,
        ..LstmConfig::tiny()
    };
    let net = LstmNet::new(cfg).unwrap();
    let mut p = net.init_seeded(14);
    perturb_spectral(&mut p, 15);
    let groups = check(&net, &p, input(16, 8, 3).view(), [0.2, -0.9, 0.6], Some(17), 1e-5).unwrap();
    assert_groups("lstm dropout", &groups);
}
