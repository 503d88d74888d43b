//! Executes scenarios: runs each experiment table, writes artifacts and
//! assembles the report.

use std::path::Path;
use std::time::Instant;

use trapctl_core::analysis::{
    allan_deviation, band_power, fit_gaussian_coherence, linreg_residual, psd_estimate,
    ramsey_visibility, step_response_metrics, FreqSeries, Spectrum,
};
use trapctl_core::auxlocks::{intensity_lock_run, offset_lock_run, MasterSpec, SlaveSpec};
use trapctl_core::comblock::{
    calibrate_slew, comb_lock_run, predicted_slew_hz_per_s, unlocked_error_trace, LockTrajectory,
    PiController,
};
use trapctl_core::dacsim::{apply_filter_chain, run_sequence, UpdateMode};
use trapctl_core::pidpipe::{pipeline_run, PidChannelConfig, CHANNELS};
use trapctl_core::plant::{IntensityPlant, RepRateConfig, RepRatePlant};
use trapctl_core::rng::seeded;

use crate::artifacts::{num, Artifacts};
use crate::report::{evaluate, Metrics, RunReport};
use crate::scenario::{
    dac_program, AveragingSection, CalibrationSection, CoherenceSection, CombLockSection,
    DacSection, IntensitySection, OffsetLockSection, PipelineSection, Scenario, SourceSpec,
};

/// Stable per-experiment seed so adding a table never shifts another's
/// random stream.
pub fn sub_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

type Step = Result<(), String>;

/// Runs every experiment table in `scenario`, writing into `out_dir`.
/// Faults stop the run; whatever was produced up to then is kept.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> RunReport {
    let start = Instant::now();
    let seed = scenario.seed();
    let mut metrics = Metrics::default();
    let mut fault = None;
    let mut files = Vec::new();
    match Artifacts::create(out_dir) {
        Ok(mut art) => {
            let result = run_tables(scenario, seed, &mut art, &mut metrics);
            if let Err(e) = result {
                fault = Some(e);
            }
            files = art.written().to_vec();
        }
        Err(e) => fault = Some(format!("{}: {e}", out_dir.display())),
    }
    let expectations = evaluate(&scenario.expect, &metrics);
    let passed = fault.is_none() && expectations.iter().all(|e| e.passed);
    let report = RunReport {
        scenario: scenario.name.clone(),
        seed,
        metrics: metrics.into_vec(),
        expectations,
        artifacts: files,
        fault,
        passed,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    if let Ok(art) = Artifacts::create(out_dir) {
        if let Err(e) = art.json("report.json", &report) {
            eprintln!("warning: could not write report: {e}");
        }
    }
    report
}

fn run_tables(s: &Scenario, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    if let Some(c) = &s.comb_lock {
        comb_lock(c, sub_seed(seed, "comb_lock"), art, m).map_err(|e| format!("comb_lock: {e}"))?;
    }
    if let Some(c) = &s.calibration {
        calibration(c, sub_seed(seed, "calibration"), art, m)
            .map_err(|e| format!("calibration: {e}"))?;
    }
    if let Some(a) = &s.averaging {
        averaging(a, sub_seed(seed, "averaging"), art, m).map_err(|e| format!("averaging: {e}"))?;
    }
    if let Some(o) = &s.offset_lock {
        offset_lock(o, seed, art, m).map_err(|e| format!("offset_lock: {e}"))?;
    }
    if let Some(i) = &s.intensity_lock {
        intensity(i, sub_seed(seed, "intensity_lock"), art, m)
            .map_err(|e| format!("intensity_lock: {e}"))?;
    }
    if let Some(p) = &s.pipeline {
        pipeline(p, sub_seed(seed, "pipeline"), art, m).map_err(|e| format!("pipeline: {e}"))?;
    }
    if let Some(d) = &s.dac {
        dac(d, s.base_dir.as_deref(), sub_seed(seed, "dac"), art, m)
            .map_err(|e| format!("dac: {e}"))?;
    }
    if let Some(c) = &s.coherence {
        coherence(c, sub_seed(seed, "coherence"), art, m).map_err(|e| format!("coherence: {e}"))?;
    }
    Ok(())
}

fn lock_rows(art: &mut Artifacts, name: &str, traj: &LockTrajectory) -> Step {
    art.csv(
        name,
        &[
            "k",
            "t_s",
            "f_rep_hz",
            "f0_hz",
            "f2_hz",
            "error_v",
            "residual_hz",
            "locked",
        ],
        traj.rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                num(r.t_s),
                num(r.f_rep_hz),
                num(r.f0_hz),
                num(r.f2_hz),
                num(r.error_v),
                num(r.residual_hz),
                u8::from(r.locked).to_string(),
            ]
        }),
    )
}

fn comb_lock(c: &CombLockSection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    const MODULE: &str = "comblock";
    let mut plant = RepRatePlant::new(c.plant, seed).map_err(|e| e.to_string())?;
    if let Some(step) = c.step {
        plant = plant.with_step(step.at_s, step.size_hz);
    }
    let pi = PiController::new(c.p_gain, c.i_gain, c.plant.f_rep_hz);
    let traj = comb_lock_run(plant, &c.config, pi, c.duration_s).map_err(|e| e.to_string())?;
    lock_rows(art, "comb_lock.csv", &traj)?;
    if let Some(f) = &traj.fault {
        return Err(f.to_string());
    }
    m.push(
        MODULE,
        "predicted_slew_hz_per_s",
        predicted_slew_hz_per_s(&c.config, c.i_gain),
    );
    if let Some(step) = c.step {
        let t: Vec<f64> = traj.rows.iter().map(|r| r.t_s).collect();
        let f0: Vec<f64> = traj.rows.iter().map(|r| r.f0_hz).collect();
        let sm = step_response_metrics(&t, &f0, Some(step.at_s)).map_err(|e| e.to_string())?;
        m.push("analysis", "slew_hz_per_s", sm.slew_hz_per_s);
        m.push("analysis", "settle_time_s", sm.settle_time_s);
        m.push("analysis", "overshoot", sm.overshoot);
    }
    m.push(MODULE, "residual_rms_hz", traj.residual_stats.rms_hz);
    m.push(
        MODULE,
        "residual_max_abs_hz",
        traj.residual_stats.max_abs_hz,
    );
    m.push(MODULE, "locked", f64::from(u8::from(traj.locked)));
    if let Some(t) = traj.lock_acquired_s {
        m.push(MODULE, "lock_acquired_s", t);
    }
    Ok(())
}

fn calibration(c: &CalibrationSection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    const MODULE: &str = "comblock";
    let cal = calibrate_slew(
        &c.config,
        c.f_rep_hz,
        c.p_gain,
        c.target_slew_hz_per_s,
        c.step_hz,
        c.rel_tol,
        c.max_iterations,
    )
    .map_err(|e| e.to_string())?;
    art.csv(
        "calibration.csv",
        &[
            "p_gain",
            "i_gain",
            "predicted_slew_hz_per_s",
            "measured_slew_hz_per_s",
            "iterations",
        ],
        [vec![
            num(cal.p_gain),
            num(cal.i_gain),
            num(cal.predicted_slew_hz_per_s),
            num(cal.measured_slew_hz_per_s),
            cal.iterations.to_string(),
        ]],
    )?;
    m.push(MODULE, "i_gain", cal.i_gain);
    m.push(MODULE, "measured_slew_hz_per_s", cal.measured_slew_hz_per_s);
    m.push(
        MODULE,
        "predicted_slew_hz_per_s",
        cal.predicted_slew_hz_per_s,
    );
    m.push(MODULE, "calibration_iterations", cal.iterations as f64);

    let plant = RepRatePlant::new(
        RepRateConfig {
            f_rep_hz: c.f_rep_hz,
            drift_hz_per_s: c.ramp_hz_per_s,
            white_fm_rms_hz: 0.0,
        },
        seed,
    )
    .map_err(|e| e.to_string())?;
    let cfg = trapctl_core::comblock::CombLockConfig {
        stats_from_s: c.ramp_settle_s,
        ..c.config.clone()
    };
    let pi = PiController::new(cal.p_gain, cal.i_gain, c.f_rep_hz);
    let traj = comb_lock_run(plant, &cfg, pi, c.ramp_duration_s).map_err(|e| e.to_string())?;
    lock_rows(art, "calibration_ramp.csv", &traj)?;
    if let Some(f) = &traj.fault {
        return Err(f.to_string());
    }
    m.push(
        MODULE,
        "ramp_residual_max_abs_hz",
        traj.residual_stats.max_abs_hz,
    );
    m.push(MODULE, "ramp_residual_rms_hz", traj.residual_stats.rms_hz);
    Ok(())
}

fn averaging(a: &AveragingSection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    let mut first = None;
    let mut summary = Vec::new();
    for &n in &a.oversample {
        let cfg = trapctl_core::comblock::CombLockConfig {
            oversample_n: n,
            adc: a.config.adc.with_noise(a.noise_rms_volts),
            ..a.config.clone()
        };
        let trace = unlocked_error_trace(
            &cfg,
            a.detuning_hz,
            a.initial_phase_cycles,
            a.samples,
            seed ^ u64::from(n),
        )
        .map_err(|e| e.to_string())?;
        art.csv(
            &format!("averaging_n{n}.csv"),
            &["t_s", "error_v"],
            trace.iter().map(|&(t, d)| vec![num(t), num(d)]),
        )?;
        let r = linreg_residual(&trace).map_err(|e| e.to_string())?;
        let base = *first.get_or_insert(r);
        m.push("analysis", format!("residual_variance_n{n}_v2"), r);
        m.push("analysis", format!("variance_ratio_n{n}"), r / base);
        m.push(
            "comblock",
            format!("loop_rate_n{n}_hz"),
            cfg.effective_rate_hz(),
        );
        summary.push(vec![
            n.to_string(),
            num(cfg.effective_rate_hz()),
            num(r),
            num(r / base),
        ]);
    }
    art.csv(
        "averaging.csv",
        &["n", "loop_rate_hz", "residual_variance_v2", "ratio"],
        summary,
    )
}

fn offset_lock(o: &OffsetLockSection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    const MODULE: &str = "auxlocks";
    let master = MasterSpec {
        frequency_hz: o.master.frequency_hz,
        drift_hz_per_s: o.master.drift_hz_per_s,
        white_fm_rms_hz: o.master.white_fm_rms_hz,
        seed: sub_seed(seed, "offset_lock.master"),
    };
    for (i, sl) in o.slaves.iter().enumerate() {
        let mut cfg = o.config.clone();
        cfg.prescaler_n = sl.prescaler_n.unwrap_or(cfg.prescaler_n);
        cfg.f_dds_hz = sl.f_dds_hz.unwrap_or(cfg.f_dds_hz);
        let side = cfg.sign.sign();
        let spec = SlaveSpec {
            free_running_hz: master.frequency_hz
                + side * cfg.target_offset_hz()
                + sl.start_offset_hz,
            drift_hz_per_s: sl.drift_hz_per_s,
            white_fm_rms_hz: sl.white_fm_rms_hz,
            detector_noise_rms_hz: sl.detector_noise_rms_hz,
            seed: sub_seed(seed, &format!("offset_lock.slave{i}")),
        };
        let traj =
            offset_lock_run(&master, &[spec], &cfg, o.duration_s).map_err(|e| e.to_string())?;
        let t = &traj[0];
        art.csv(
            &format!("offset_report_s{i}.csv"),
            &["t_s", "beat_error_hz"],
            t.report.iter().map(|&(ts, e)| vec![num(ts), num(e)]),
        )?;
        if let Some(f) = &t.fault {
            return Err(format!("slave {i}: {f}"));
        }
        m.push(
            MODULE,
            format!("offset_error_hz_s{i}"),
            t.final_beat_hz - t.final_target_hz,
        );
        m.push(MODULE, format!("target_offset_hz_s{i}"), t.final_target_hz);
        let values: Vec<f64> = t.report.iter().skip(1).map(|r| r.1).collect();
        let need = 2
            * (o.adev_taus_s.iter().cloned().fold(0.0, f64::max) / cfg.report_interval_s) as usize
            + 1;
        if values.len() < need.max(3) {
            continue;
        }
        let series =
            FreqSeries::uniform(0.0, cfg.report_interval_s, values).map_err(|e| e.to_string())?;
        let curve = allan_deviation(&series, &o.adev_taus_s);
        art.csv(
            &format!("offset_adev_s{i}.csv"),
            &["tau_s", "adev_hz", "stderr_hz", "n_differences"],
            curve.points.iter().map(|p| {
                vec![
                    num(p.tau_s),
                    num(p.adev),
                    num(p.stderr),
                    p.n_differences.to_string(),
                ]
            }),
        )?;
        if let Some(p) = curve.points.first() {
            m.push_with_error(
                "analysis",
                format!("adev_hz_tau{}_s{i}", p.tau_s),
                p.adev,
                Some(p.stderr),
            );
        }
        if let Some(slope) = curve.log_slope(o.slope_range_s.0, o.slope_range_s.1) {
            m.push("analysis", format!("adev_slope_s{i}"), slope);
        }
    }
    Ok(())
}

fn intensity(c: &IntensitySection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    const MODULE: &str = "auxlocks";
    let plant = IntensityPlant::new(c.plant, seed).map_err(|e| e.to_string())?;
    let traj = intensity_lock_run(plant, &c.config, c.gate, seed, c.duration_s)
        .map_err(|e| e.to_string())?;
    art.csv(
        "intensity.csv",
        &["t_s", "adc_v", "dds_amplitude", "gate", "saturated"],
        traj.rows.iter().map(|r| {
            vec![
                num(r.t_s),
                num(r.adc_v),
                r.dds_amplitude.to_string(),
                u8::from(r.gate).to_string(),
                u8::from(r.saturated).to_string(),
            ]
        }),
    )?;
    art.csv(
        "intensity_windows.csv",
        &[
            "start_s",
            "end_s",
            "on",
            "steps",
            "first_adc_v",
            "last_adc_v",
            "first_amplitude",
            "last_amplitude",
            "amplitude_constant",
        ],
        traj.windows.iter().map(|w| {
            vec![
                num(w.start_s),
                num(w.end_s),
                u8::from(w.on).to_string(),
                w.steps.to_string(),
                num(w.first_adc_v),
                num(w.last_adc_v),
                w.first_amplitude.to_string(),
                w.last_amplitude.to_string(),
                u8::from(w.amplitude_constant).to_string(),
            ]
        }),
    )?;
    let full: Vec<_> = traj
        .windows
        .iter()
        .filter(|w| w.steps >= c.min_window_steps)
        .collect();
    let on_err = full
        .iter()
        .filter(|w| w.on)
        .map(|w| (w.last_adc_v - c.config.setpoint_volts).abs())
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.max(e)))
        });
    if let Some(e) = on_err {
        m.push(MODULE, "on_window_max_error_v", e);
    }
    let held = full.iter().filter(|w| !w.on).all(|w| w.amplitude_constant);
    m.push(MODULE, "off_windows_held", f64::from(u8::from(held)));
    m.push(MODULE, "saturation_events", traj.saturation_events as f64);
    if let Some(last) = traj.rows.last() {
        m.push(MODULE, "final_adc_v", last.adc_v);
    }
    Ok(())
}

fn pipeline(p: &PipelineSection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    const MODULE: &str = "pidpipe";
    let mut configs: [PidChannelConfig; CHANNELS] = Default::default();
    let mut sources = [SourceSpec::Constant { volts: 0.0 }; CHANNELS];
    for c in &p.channels {
        configs[c.index] = c.config.clone();
        sources[c.index] = c.source;
    }
    let rate = p.adc.sample_rate_hz;
    let out = pipeline_run(&configs, &p.adc, seed, p.duration_s, |c, f| {
        sources[c].volts(f as f64 / rate)
    })
    .map_err(|e| e.to_string())?;
    for (c, log) in out.channels.iter().enumerate() {
        if !configs[c].enabled {
            continue;
        }
        art.csv(
            &format!("pipeline_ch{c}.csv"),
            &["t_s", "error_v", "output"],
            log.entries
                .iter()
                .map(|e| vec![num(e.t_s), num(e.error_v), num(e.output_value)]),
        )?;
        art.csv(
            &format!("pipeline_routed_ch{c}.csv"),
            &["t_s", "value"],
            log.routed.iter().map(|&(t, v)| vec![num(t), num(v)]),
        )?;
        if let Some(f) = &log.fault {
            return Err(f.to_string());
        }
        m.push(
            MODULE,
            format!("writes_ch{c}"),
            log.route_stats.emitted as f64,
        );
        m.push(
            MODULE,
            format!("dropped_ch{c}"),
            log.route_stats.dropped as f64,
        );
        if let Some(last) = log.entries.last() {
            m.push(MODULE, format!("final_output_ch{c}"), last.output_value);
        }
    }
    Ok(())
}

fn mode_name(mode: UpdateMode) -> &'static str {
    match mode {
        UpdateMode::Synchronous => "synchronous",
        UpdateMode::Asynchronous => "asynchronous",
    }
}

fn dac(
    d: &DacSection,
    base: Option<&Path>,
    seed: u64,
    art: &mut Artifacts,
    m: &mut Metrics,
) -> Step {
    const MODULE: &str = "dacsim";
    let mut spectra: Vec<(UpdateMode, Spectrum, Spectrum)> = Vec::new();
    let mut bands = Vec::new();
    for &mode in &d.modes {
        let name = mode_name(mode);
        let program = dac_program(d, base, mode).map_err(|(k, e)| format!("{k}: {e}"))?;
        let sim = trapctl_core::dacsim::SimulationSpec {
            seed,
            ..d.simulation.clone()
        };
        let out = run_sequence(&program, &d.timing, &sim).map_err(|e| e.to_string())?;
        let fs = out.sample_rate_hz;
        art.jsonl(&format!("dac_events_{name}.jsonl"), &out.events)?;
        let keep = d.waveform_samples;
        art.csv(
            &format!("dac_waveform_{name}.csv"),
            &["t_s", "channel", "volts"],
            out.observed
                .iter()
                .zip(&out.waveforms)
                .flat_map(|(&ch, w)| {
                    w.iter()
                        .take(keep)
                        .enumerate()
                        .map(move |(i, &v)| vec![num(i as f64 / fs), ch.to_string(), num(v)])
                }),
        )?;
        let w = &out.waveforms[0];
        let raw = psd_estimate(w, fs, d.segment_length, 0.5).map_err(|e| e.to_string())?;
        let filtered = apply_filter_chain(w, fs, &d.filter).map_err(|e| e.to_string())?;
        let filt = psd_estimate(&filtered, fs, d.segment_length, 0.5).map_err(|e| e.to_string())?;
        let band = band_power(&filt, d.band_hz.0, d.band_hz.1).map_err(|e| e.to_string())?;
        let proms: Vec<f64> = (1..=d.harmonics)
            .map(|k| f64::from(k) * d.update_rate_hz)
            .filter(|&f| f < raw.nyquist_hz())
            .map(|f| raw.peak_near(f, 1, 64).prominence_db)
            .collect();
        if !proms.is_empty() {
            m.push(
                "analysis",
                format!("harmonic_min_prominence_db_{name}"),
                proms.iter().cloned().fold(f64::INFINITY, f64::min),
            );
            m.push(
                "analysis",
                format!("harmonic_max_prominence_db_{name}"),
                proms.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
        }
        m.push("analysis", format!("band_power_v2_{name}"), band);
        m.push(MODULE, format!("updates_{name}"), out.events.len() as f64);
        bands.push((mode, band));
        spectra.push((mode, raw, filt));
    }
    if let Some((_, first, _)) = spectra.first() {
        let mut header = vec!["freq_hz".to_string()];
        for (mode, _, _) in &spectra {
            header.push(format!("psd_{}", mode_name(*mode)));
            header.push(format!("psd_filtered_{}", mode_name(*mode)));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..first.freqs_hz.len()).map(|i| {
            let mut row = vec![num(first.freqs_hz[i])];
            for (_, raw, filt) in &spectra {
                row.push(num(raw.psd[i]));
                row.push(num(filt.psd[i]));
            }
            row
        });
        art.csv("dac_psd.csv", &header_refs, rows)?;
    }
    let sync = bands.iter().find(|b| b.0 == UpdateMode::Synchronous);
    let asyn = bands.iter().find(|b| b.0 == UpdateMode::Asynchronous);
    if let (Some(s), Some(a)) = (sync, asyn) {
        m.push("analysis", "band_gap_db", 10.0 * (s.1 / a.1).log10());
    }
    Ok(())
}

fn coherence(c: &CoherenceSection, seed: u64, art: &mut Artifacts, m: &mut Metrics) -> Step {
    let mut rng = seeded(seed);
    let mut points = Vec::new();
    for &tau in &c.taus_s {
        points.push(
            ramsey_visibility(&c.source, tau, c.trials, &mut rng).map_err(|e| e.to_string())?,
        );
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.tau_s, p.visibility)).collect();
    let fit = fit_gaussian_coherence(&xy).map_err(|e| e.to_string())?;
    let a = fit.amplitude;
    let alpha = fit.coherence_time_alpha_s;
    art.csv(
        "coherence.csv",
        &["tau_s", "visibility", "stderr", "fit"],
        points.iter().map(|p| {
            vec![
                num(p.tau_s),
                num(p.visibility),
                num(p.stderr),
                num(a * (-(p.tau_s / alpha).powi(2)).exp()),
            ]
        }),
    )?;
    m.push_with_error(
        "analysis",
        "coherence_time_s",
        alpha,
        Some(fit.alpha_stderr),
    );
    m.push_with_error(
        "analysis",
        "fringe_amplitude",
        a,
        Some(fit.amplitude_stderr),
    );
    Ok(())
}
