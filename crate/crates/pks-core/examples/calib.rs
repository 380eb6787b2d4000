// Temporary calibration probe (removed before release).
use pks_core::dynamics::{
    select_amplitude, StepperOptions, StepperState, Stepper, StrainField, TransportScheme,
};
use pks_core::grid::{DensityField, Grid2D, MomentWeight};
use pks_core::kernel::{build_kernel, BridgeKind};
use std::f64::consts::PI;
use std::time::Instant;

fn run_static(
    label: &str,
    mass_pi: f64,
    n_side: usize,
    transport: TransportScheme,
    cfl: f64,
    eps_cells: f64,
    t_end: f64,
) {
    let mass = mass_pi * PI;
    let g = Grid2D::new(n_side, 8.0).unwrap();
    let table = build_kernel(eps_cells * g.spacing(), g, BridgeKind::LogCap).unwrap();
    let n0 = DensityField::gaussian(g, mass, (0.0, 0.0), 0.5);
    let peak0 = n0.max_value();
    let mut state = StepperState::new(n0);
    let opts = StepperOptions {
        cfl,
        transport,
        dt_cap: 0.05,
        track_symmetry: false,
        ..Default::default()
    };
    let mut stepper = Stepper::new(&table, StrainField::new(0.0), opts);
    stepper.prime(&state);
    let t0 = Instant::now();
    let out_dt = 0.0125;
    let mut records: Vec<(f64, f64, f64, f64)> = Vec::new(); // t, V, maxn, block3frac
    let mut next = 0.0f64;
    let mut fired = None;
    let mut t_b3 = None;
    let mut t_r10 = None;
    let mut t_r15 = None;
    loop {
        if state.t >= next - 1e-12 {
            let v = state.n.moment(MomentWeight::RadiusSquared);
            let mx = state.n.max_value();
            let b3 = state.n.max_block3_mass() / state.n.integrate();
            records.push((state.t, v, mx, b3));
            next += out_dt;
        }
        if state.t >= t_end - 1e-12 {
            break;
        }
        // detector conditions (support-ratio gate 10x)
        let mx = state.n.max_value();
        if t_b3.is_none() && state.n.max_block3_mass() >= 0.25 * state.n.integrate() {
            t_b3 = Some(state.t);
        }
        if t_r10.is_none() && mx >= 10.0 * peak0 { t_r10 = Some(state.t); }
        if t_r15.is_none() && mx >= 15.0 * peak0 { t_r15 = Some(state.t); }
        if fired.is_none() {
            let b3ok = mx >= 10.0 * peak0
                && state.n.max_block3_mass() >= 0.25 * state.n.integrate();
            if mx >= 1000.0 * peak0 || b3ok {
                fired = Some((state.t, mx / peak0));
            }
        }
        let lim = next - state.t;
        if let Err(e) = stepper.step(&mut state, lim) {
            println!("  STEP ERROR at t={:.4}: {e}", state.t);
            break;
        }
        if state.step_count > 2_000_000 {
            break;
        }
    }
    let wall = t0.elapsed().as_secs_f64();
    let fit = |t_lo: f64, t_hi: f64| {
        let win: Vec<_> = records
            .iter()
            .filter(|r| r.0 >= t_lo - 1e-9 && r.0 <= t_hi + 1e-9)
            .collect();
        let n = win.len() as f64;
        let (mut st, mut sv, mut stt, mut stv) = (0.0, 0.0, 0.0, 0.0);
        for r in &win {
            st += r.0;
            sv += r.1;
            stt += r.0 * r.0;
            stv += r.0 * r.1;
        }
        (n * stv - st * sv) / (n * stt - st * st)
    };
    let slope = fit(0.0, 1.0);
    let s_half = fit(0.0, 0.5);
    let s_quarter = fit(0.0, 0.25);
    println!("  windows: [0,1]={slope:+.4} [0,0.5]={s_half:+.4} [0,0.25]={s_quarter:+.4}");
    if let Some((tf, _)) = fired {
        println!("  pre-fire slope [0,{tf:.3}] = {:+.4}", fit(0.0, tf));
    }
    println!("  crossings: b3_25%={t_b3:?} ratio10={t_r10:?} ratio15={t_r15:?}");
    let ideal = 4.0 * mass * (1.0 - mass / (8.0 * PI));
    let maxn_end = records.last().unwrap().2;
    let maxratio = records.iter().map(|r| r.2).fold(0.0f64, f64::max) / peak0;
    let b3max = records.iter().map(|r| r.3).fold(0.0f64, f64::max);
    println!(
        "{label}: slope={slope:+.4} ideal={ideal:+.4} err={:+.2}% | steps={} wall={wall:.1}s | max n/n0={maxratio:.1} (end {:.1}) b3frac_max={b3max:.3} fired={fired:?} outflow={:.2e} clamp={:.2e} drift={:.1e} negexc={:.1e}",
        100.0 * (slope - ideal) / ideal.abs().max(1e-30),
        state.step_count,
        maxn_end / peak0,
        state.boundary_outflow,
        state.clamped_mass,
        state.max_interior_drift,
        state.max_negative_excursion,
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    match which {
        "virial" => {
            run_static("8pi  muscl cfl.4 eps1h N256", 8.0, 256, TransportScheme::Muscl, 0.4, 1.0, 1.0);
            run_static("8pi  muscl cfl.45 eps1h N256", 8.0, 256, TransportScheme::Muscl, 0.45, 1.0, 1.0);
            run_static("8pi  muscl cfl.4 eps1h N512", 8.0, 512, TransportScheme::Muscl, 0.4, 1.0, 1.0);
            run_static("12pi muscl cfl.4 eps1h N256", 12.0, 256, TransportScheme::Muscl, 0.4, 1.0, 0.3);
            run_static("12pi muscl cfl.4 eps2h N256", 12.0, 256, TransportScheme::Muscl, 0.4, 2.0, 0.3);
        }
        "blow" => {
            run_static("12pi muscl cfl.4 eps1h N256", 12.0, 256, TransportScheme::Muscl, 0.4, 1.0, 0.3);
            run_static("12pi muscl cfl.4 eps1h N512", 12.0, 512, TransportScheme::Muscl, 0.4, 1.0, 0.3);
        }
        "nearcrit" => {
            run_static("8.5pi muscl eps1h N256 t6", 8.5, 256, TransportScheme::Muscl, 0.4, 1.0, 6.0);
            run_static("7.5pi muscl eps1h N256 t10", 7.5, 256, TransportScheme::Muscl, 0.4, 1.0, 10.0);
        }
        "strain" => {
            let mass = 12.0 * PI;
            let g = Grid2D::new(512, 32.0).unwrap();
            let table = build_kernel(2.0 * g.spacing(), g, BridgeKind::LogCap).unwrap();
            let mut n0 = DensityField::gaussian(g, mass / 2.0, (0.0, 4.0), 0.5);
            let lower = DensityField::gaussian(g, mass / 2.0, (0.0, -4.0), 0.5);
            for k in 0..n0.values().len() {
                n0.values_mut()[k] += lower.values()[k];
            }
            let mut state = StepperState::new(n0);
            let a = select_amplitude(mass / 2.0, 0.25).unwrap();
            let t_box = (0.5 * 32.0 / 4.0f64).ln() / a;
            println!("A = {a:.3}, T_box = {t_box:.5}");
            let opts = StepperOptions {
                dt_cap: t_box / 64.0,
                ..Default::default()
            };
            let mut stepper = Stepper::new(&table, StrainField::new(a), opts);
            stepper.prime(&state);
            let t0 = Instant::now();
            while state.t < t_box - 1e-12 {
                let lim = t_box - state.t;
                stepper.step(&mut state, lim).unwrap();
            }
            let wall = t0.elapsed().as_secs_f64();
            let hp = state.n.half_plane_stats().unwrap();
            println!(
                "strained N512: steps={} wall={wall:.0}s y+={:.3} (exp {:.3}) V+={:.3} strip={:.3e} sym={:.2e} outflow={:.2e}",
                state.step_count,
                hp.center,
                4.0 * (a * state.t).exp(),
                hp.spread,
                state.n.strip_mass(0.5),
                state.max_symmetry_error,
                state.boundary_outflow,
            );
        }
        _ => {
            println!("usage: calib [virial|blow|nearcrit|strain]");
        }
    }
}
