use qbound::bounds::{BoundPipeline, Verdict, DEFAULT_RTOL};
use qbound::moments::{moment_sequence, ObjectModel};
use qbound::otf::OtfModel;
use qbound::thermal::{self, ThermalModel};
use qbound::linalg::SymMatrix;
use qbound::{Error, Precision, Real};

fn prec() -> Precision {
    Precision::new(256).unwrap()
}

fn real(x: f64) -> Real {
    Real::from_f64(x, prec())
}

fn pipeline(obj: &ObjectModel, q_max: usize) -> BoundPipeline {
    let otf = OtfModel::gaussian(real(1.0)).unwrap();
    BoundPipeline::new(obj, &otf, q_max, None, DEFAULT_RTOL).unwrap()
}

#[test]
fn gaussian_first_moment_bound() {
    let obj = ObjectModel::gaussian(real(0.01)).unwrap();
    let p = pipeline(&obj, 16);
    let r = p.k_tilde(1, 1).unwrap();
    assert_eq!(r.verdict, Verdict::Converged);
    assert!((r.value.to_f64() - 4.0003).abs() < 1e-9);
    assert!(r.norm_residual.to_f64().abs() < 1e-30);
    assert!((p.leading_order(1).unwrap().to_f64() - 4.0).abs() < 1e-12);
}

#[test]
fn second_moment_scales_as_inverse_square() {
    let k = |d: f64| {
        let obj = ObjectModel::gaussian(real(d)).unwrap();
        pipeline(&obj, 16).k_tilde(2, 2).unwrap().value.to_f64()
    };
    let ratio = k(0.005) / k(0.01);
    assert!((ratio - 4.0).abs() < 0.01, "{ratio}");
}

#[test]
fn matrix_is_symmetric() {
    let obj = ObjectModel::uniform(real(0.05)).unwrap().with_center(real(0.1));
    let m = pipeline(&obj, 12).k_tilde_matrix(&[1, 2, 3]).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m[(i, j)], m[(j, i)]);
        }
    }
}

#[test]
fn moments_of_builtin_objects() {
    let g = moment_sequence(&ObjectModel::gaussian(real(0.2)).unwrap(), 6).unwrap();
    assert_eq!(g.phi[6], 15.0);
    let u = moment_sequence(&ObjectModel::uniform(real(1.0)).unwrap(), 4).unwrap();
    assert_eq!(u.phi[4], Real::from_ratio(1, 5, prec()));
}

#[test]
fn zero_delta_is_rejected() {
    assert!(matches!(ObjectModel::gaussian(real(0.0)), Err(Error::InvalidInput(_))));
}

#[test]
fn single_mode_thermal_values() {
    let t = 0.5;
    let one = |x: f64| SymMatrix::from_f64_rows(&[&[x]], prec());
    let m = ThermalModel::new(one(t), vec![one(1.0)], 1.0).unwrap();
    let k = thermal::thermal_qfi(&m).unwrap()[(0, 0)].to_f64();
    assert!((k - 1.0 / (t * (1.0 + t))).abs() < 1e-14);
    let ir = thermal::infrared_fisher(&m).unwrap()[(0, 0)].to_f64();
    assert!((ir - 1.0 / (t * t)).abs() < 1e-14);
}
