use std::ptr;

use theta_wave_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { tw_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

unsafe fn gaussian(n: usize, length: f64, width: f64) -> (*mut TwGrid, *mut TwField) {
    let mut g = ptr::null_mut();
    assert_eq!(tw_grid_new(n, length, -length / 2.0, &mut g), TwStatus::Ok);
    let mut x = vec![0.0; n];
    assert_eq!(tw_grid_points(g, x.as_mut_ptr(), n), TwStatus::Ok);
    let v: Vec<f64> = x.iter().map(|x| (-(x / width).powi(2)).exp()).collect();
    let mut f = ptr::null_mut();
    assert_eq!(tw_field_new(g, v.as_ptr(), n, &mut f), TwStatus::Ok);
    (g, f)
}

#[test]
fn null_and_size_errors() {
    unsafe {
        assert_eq!(tw_grid_new(64, 10.0, 0.0, ptr::null_mut()), TwStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut g = ptr::null_mut();
        assert_eq!(tw_grid_new(64, -1.0, 0.0, &mut g), TwStatus::InvalidArgument);
        assert!(g.is_null());
        assert_eq!(tw_grid_n(ptr::null()), 0);

        let (g, f) = gaussian(64, 10.0, 1.0);
        let mut short = [0.0; 10];
        assert_eq!(tw_field_values(f, short.as_mut_ptr(), 10), TwStatus::BufferTooSmall);
        let mut f2 = ptr::null_mut();
        assert_eq!(tw_field_new(g, short.as_ptr(), 10, &mut f2), TwStatus::InvalidArgument);
        let mut out = ptr::null_mut();
        assert_eq!(tw_rhs(f, f64::INFINITY, &mut out), TwStatus::InvalidArgument);
        tw_field_free(f);
        tw_grid_free(g);
        tw_field_free(ptr::null_mut());
    }
}

#[test]
fn helmholtz_round_trip_and_derivative() {
    unsafe {
        let (g, u) = gaussian(128, 40.0, 2.0);
        let (mut m, mut back, mut du) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(tw_helmholtz_apply(u, &mut m), TwStatus::Ok);
        assert_eq!(tw_helmholtz_solve(m, &mut back), TwStatus::Ok);
        assert_eq!(tw_deriv(u, &mut du), TwStatus::Ok);
        let n = tw_field_len(u);
        let (mut a, mut b, mut d, mut x) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        tw_field_values(u, a.as_mut_ptr(), n);
        tw_field_values(back, b.as_mut_ptr(), n);
        tw_field_values(du, d.as_mut_ptr(), n);
        tw_grid_points(g, x.as_mut_ptr(), n);
        for i in 0..n {
            assert!((a[i] - b[i]).abs() < 1e-12);
            let exact = -x[i] / 2.0 * (-(x[i] / 2.0).powi(2)).exp();
            assert!((d[i] - exact).abs() < 1e-9, "{} vs {exact}", d[i]);
        }
        for p in [m, back, du, u] {
            tw_field_free(p);
        }
        tw_grid_free(g);
    }
}

#[test]
fn evolve_and_inspect() {
    unsafe {
        let (g, u) = gaussian(128, 40.0, 2.0);
        let mut cfg = std::mem::zeroed();
        assert_eq!(tw_sim_config_default(1.0 / 3.0, 1.0, &mut cfg), TwStatus::Ok);
        cfg.output_every = 5;
        let mut t = ptr::null_mut();
        assert_eq!(tw_evolve(u, &cfg, &mut t), TwStatus::Ok);
        let len = tw_trajectory_len(t);
        assert!(len >= 2);
        let mut times = vec![0.0; len];
        assert_eq!(tw_trajectory_times(t, times.as_mut_ptr(), len), TwStatus::Ok);
        assert_eq!(times[0], 0.0);
        assert!((times[len - 1] - 1.0).abs() < 1e-12);
        let mut b = TwBlowup::default();
        assert_eq!(tw_trajectory_blowup(t, &mut b), TwStatus::Ok);
        assert_eq!(b.detected, 0);
        let mut peak = 0.0;
        assert_eq!(tw_trajectory_peak_slope(t, &mut peak), TwStatus::Ok);
        assert!(peak > 0.0 && peak.is_finite());
        let mut s = ptr::null_mut();
        assert_eq!(tw_trajectory_state(t, len, &mut s), TwStatus::OutOfRange);
        assert_eq!(tw_trajectory_state(t, len - 1, &mut s), TwStatus::Ok);
        assert_eq!(tw_field_len(s), 128);
        tw_field_free(s);
        tw_trajectory_free(t);
        tw_field_free(u);
        tw_grid_free(g);
    }
}

#[test]
fn odd_data_blows_up_before_bound() {
    unsafe {
        let n = 2048;
        let mut g = ptr::null_mut();
        assert_eq!(tw_grid_new(n, 10.0, -5.0, &mut g), TwStatus::Ok);
        let mut x = vec![0.0; n];
        tw_grid_points(g, x.as_mut_ptr(), n);
        // u0 = -sin(2 pi x / L): odd about 0 with negative slope there.
        let v: Vec<f64> = x.iter().map(|x| -(2.0 * std::f64::consts::PI * x / 10.0).sin()).collect();
        let mut u = ptr::null_mut();
        assert_eq!(tw_field_new(g, v.as_ptr(), n, &mut u), TwStatus::Ok);
        let mut bound = 0.0;
        assert_eq!(tw_blowup_bound(u, 0.0, 0.3, 1, &mut bound), TwStatus::Ok);
        assert!(bound.is_finite() && bound > 0.0);
        let mut cfg = std::mem::zeroed();
        tw_sim_config_default(0.3, 1.5 * bound, &mut cfg);
        cfg.slope_blowup_threshold = 5.0 * 2.0 * std::f64::consts::PI / 10.0;
        cfg.output_every = 50;
        let mut t = ptr::null_mut();
        assert_eq!(tw_evolve(u, &cfg, &mut t), TwStatus::Ok, "{}", last_error());
        let mut b = TwBlowup::default();
        tw_trajectory_blowup(t, &mut b);
        assert_eq!(b.detected, 1);
        assert_eq!(b.direction, -1);
        assert!(b.t_detect <= bound, "{} > {bound}", b.t_detect);
        tw_trajectory_free(t);
        tw_field_free(u);
        tw_grid_free(g);
    }
}

#[test]
fn b_map_and_peakon() {
    unsafe {
        let mut b = 0.0;
        assert_eq!(tw_theta_to_b(1.0 / 3.0, &mut b), TwStatus::Ok);
        assert!((b - 2.0).abs() < 1e-12);
        let mut th = 0.0;
        assert_eq!(tw_b_to_theta(b, &mut th), TwStatus::Ok);
        assert!((th - 1.0 / 3.0).abs() < 1e-12);
        assert_ne!(tw_b_to_theta(-1.0, &mut th), TwStatus::Ok);

        let (mut res, mut fake) = (0.0, 0.0);
        assert_eq!(tw_peakon_residual(1.0, 0.5, 1.0, 1e-8, &mut res, &mut fake), TwStatus::Ok);
        assert!(res < 1e-8, "{res}");
        assert!(fake > 1e-3, "{fake}");
    }
}
