//! Order-preserving parallel ensemble driver.
//!
//! Particles never interact, so each worker advances whole particles
//! through the full recording grid independently; results are reassembled
//! in (time, particle) order afterwards. Every float operation happens in
//! the same sequence as in the serial reference driver, so output is
//! byte-identical for any worker count.

use advshift_core::dynamics::{
    evolve_particle, Observer, RunOutput, Snapshot, TrajectoryRecord,
};
use advshift_core::{Error, ModelPair, Setting, Vector};
use rayon::prelude::*;

struct ParticleTrack {
    observations: Vec<advshift_core::dynamics::Observation>,
    states: Vec<Vector>,
    /// Index of the grid segment where evolution failed, for picking the
    /// same error the serial driver would report.
    failed_segment: Option<(usize, Error)>,
}

#[allow(clippy::too_many_arguments)]
fn track_particle(
    x: &mut Vector,
    pid: usize,
    m: &ModelPair,
    setting: Setting,
    gamma: f64,
    record_times: &[u64],
    observer: &Observer,
    collect_snapshots: bool,
) -> ParticleTrack {
    let mut track = ParticleTrack {
        observations: Vec::with_capacity(record_times.len()),
        states: Vec::new(),
        failed_segment: None,
    };
    let mut now = 0u64;
    for (seg, &t) in record_times.iter().enumerate() {
        if let Err(e) = evolve_particle(x, m, setting, gamma, t - now, pid, now) {
            track.failed_segment = Some((seg, e));
            return track;
        }
        now = t;
        match observer.observe(x) {
            Ok(obs) => track.observations.push(obs),
            Err(e) => {
                track.failed_segment = Some((seg, e));
                return track;
            }
        }
        if collect_snapshots {
            track.states.push(x.clone());
        }
    }
    track
}

/// Parallel twin of the serial ensemble runner: same validation, same
/// record order, same bits; only the schedule differs.
pub fn run_ensemble_parallel(
    particles: &mut [Vector],
    m: &ModelPair,
    setting: Setting,
    gamma: f64,
    record_times: &[u64],
    collect_snapshots: bool,
    pool: &rayon::ThreadPool,
) -> Result<RunOutput, Error> {
    if particles.is_empty() {
        return Err(Error::EmptySamples);
    }
    if record_times.is_empty() {
        return Err(Error::InvalidParameter("no recording times given".into()));
    }
    if record_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "recording times must be strictly increasing".into(),
        ));
    }
    let observer = Observer::new(m);
    let tracks: Vec<ParticleTrack> = pool.install(|| {
        particles
            .par_iter_mut()
            .enumerate()
            .map(|(pid, x)| {
                track_particle(
                    x,
                    pid,
                    m,
                    setting,
                    gamma,
                    record_times,
                    &observer,
                    collect_snapshots,
                )
            })
            .collect()
    });
    // serial driver sees segment-major, particle-minor order; report the
    // failure it would have hit first
    if let Some((_, _, e)) = tracks
        .iter()
        .enumerate()
        .filter_map(|(pid, tr)| tr.failed_segment.as_ref().map(|(seg, e)| (*seg, pid, e)))
        .min_by_key(|(seg, pid, _)| (*seg, *pid))
    {
        return Err(e.clone());
    }
    let n = particles.len();
    let mut records = Vec::with_capacity(record_times.len() * n);
    let mut snapshots = Vec::new();
    for (ti, &t) in record_times.iter().enumerate() {
        for (pid, track) in tracks.iter().enumerate() {
            records.push(TrajectoryRecord { t, particle: pid, obs: track.observations[ti] });
        }
        if collect_snapshots {
            snapshots.push(Snapshot {
                t,
                states: tracks.iter().map(|tr| tr.states[ti].clone()).collect(),
            });
        }
    }
    Ok(RunOutput { records, snapshots })
}

/// Builds a private pool of the requested width (or rayon's default when
/// `None`); using a private pool keeps repeated calls in one process from
/// fighting over the global pool.
pub fn make_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, crate::CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        b = b.num_threads(k);
    }
    b.build()
        .map_err(|e| crate::CliError::Runtime(format!("cannot build thread pool: {e}")))
}

/// `ADVSHIFT_THREADS` beats the flag; unset or empty means the flag (or
/// default) stands.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, crate::CliError> {
    match std::env::var("ADVSHIFT_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| {
                crate::CliError::Config(format!(
                    "ADVSHIFT_THREADS: cannot parse '{v}' as a thread count"
                ))
            }),
        _ => Ok(flag),
    }
}
