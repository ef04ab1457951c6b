//! Acceptance gate. Runs every primary criterion, prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

mod common;

use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use common::*;
use vcshot::classify::{classify_lh, fit_likelihood, log_likelihood, similarity, NeighborhoodSpec};
use vcshot::encoding::{compute_distances, encode, search_threshold, DistanceTensor};
use vcshot::episode::{run_benchmark, ClassifierKind, EpisodeSpec};
use vcshot::store::{from_bytes, read_store, to_bytes, write_store, FeatureStore};
use vcshot::synthetic::{planted_clusters, PlantedParts};
use vcshot::vmf::{assign_hard, fit_vmfm, fit_vmfm_traced, vmf_log_density, FitConfig};
use vcshot::{EncodingError, VcEncoding, VectorSet};

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn em_monotonicity() -> Verdict {
    let start = Instant::now();
    let mut fits = 0;
    let mut steps = 0;
    let mut worst = 0.0f64;
    for (i, &d) in [4usize, 16, 64].iter().enumerate() {
        for (j, &v) in [2usize, 5, 20].iter().enumerate() {
            for rep in 0..6u64 {
                let seed = 1000 * i as u64 + 100 * j as u64 + rep;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = if rep % 3 == 2 {
                    // no cluster structure at all
                    let rows: Vec<Vec<f64>> = (0..300).map(|_| gaussian_unit(&mut rng, d)).collect();
                    VectorSet::from_rows(&rows)
                } else {
                    let k = rng.gen_range(1..=v + 2);
                    let kappa = rng.gen_range(2.0..200.0);
                    planted_clusters(d, k, 300 / k + 1, kappa, seed).vectors
                };
                let config = FitConfig {
                    num_vcs: v,
                    seed,
                    max_iters: 200,
                    rel_tol: 1e-12,
                    ..FitConfig::default()
                };
                let trace = fit_vmfm_traced(&x, &config).map_err(|e| format!("fit d={d} V={v}: {e}"))?.log_likelihood_trace;
                for w in trace.windows(2) {
                    let drop = (w[0] - w[1]) / w[0].abs().max(1.0);
                    worst = worst.max(drop);
                    check(w[1] >= w[0] - 1e-8 * w[0].abs(), || {
                        format!("d={d} V={v} seed={seed}: log-likelihood fell {} -> {}", w[0], w[1])
                    })?;
                }
                steps += trace.len() - 1;
                fits += 1;
            }
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!(
        "{fits} fits, {steps} EM steps, largest relative decrease {worst:.1e}, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn permutations3() -> [[usize; 3]; 6] {
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
}

fn vmf_recovery() -> Verdict {
    let start = Instant::now();
    let planted = planted_clusters(16, 3, 300, 50.0, 2024);
    let dict = fit_vmfm(&planted.vectors, &FitConfig::new(3).with_seed(11)).map_err(|e| e.to_string())?;
    let (perm, cost) = permutations3()
        .into_iter()
        .map(|p| {
            let c: f64 = (0..3).map(|t| 1.0 - dot(&planted.means[t], dict.mean(p[t]))).sum();
            (p, c)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let worst = (0..3)
        .map(|t| 1.0 - dot(&planted.means[t], dict.mean(perm[t])))
        .fold(0.0f64, f64::max);
    let labels = assign_hard(&planted.vectors, &dict).map_err(|e| e.to_string())?;
    let correct = labels
        .iter()
        .zip(&planted.labels)
        .filter(|(&got, &truth)| got == perm[truth])
        .count();
    let accuracy = correct as f64 / labels.len() as f64;
    check(worst <= 0.05, || format!("mean cosine distance {worst} > 0.05 (total {cost})"))?;
    check(accuracy >= 0.95, || format!("assignment accuracy {accuracy} < 0.95"))?;
    within(start.elapsed(), 10)?;
    Ok(format!("max cosine distance {worst:.2e}, assignment accuracy {accuracy:.4}"))
}

fn density_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for &kappa in &[0.1, 1.0, 10.0, 100.0, 1e4] {
        for _ in 0..50 {
            let mu = gaussian_unit(&mut rng, 3);
            let f = gaussian_unit(&mut rng, 3);
            for g in [f.clone(), mu.clone(), mu.iter().map(|x| -x).collect()] {
                let got = vmf_log_density(&g, &mu, kappa).map_err(|e| e.to_string())?;
                let want = log_vmf3(&g, &mu, kappa);
                let err = (got - want).abs() / want.abs().max(1.0);
                worst = worst.max(err);
                check(err <= 1e-10, || format!("κ={kappa}: {got} vs closed form {want}"))?;
            }
        }
    }
    // E_uniform[f] · surface area of S² = ∫ f dS
    let n = 400_000;
    let mu = [0.0, 0.0, 1.0];
    let mut acc = 0.0;
    for _ in 0..n {
        let f = gaussian_unit(&mut rng, 3);
        acc += vmf_log_density(&f, &mu, 1.0).map_err(|e| e.to_string())?.exp();
    }
    let integral = acc / n as f64 * 4.0 * std::f64::consts::PI;
    check((integral - 1.0).abs() <= 0.02, || format!("Monte-Carlo normalization {integral}"))?;
    Ok(format!("max relative error {worst:.1e} vs closed form, MC integral {integral:.4}"))
}

fn naive_coverage(t: &DistanceTensor, threshold: f64) -> f64 {
    let covered = (0..t.positions())
        .filter(|&p| (0..t.num_vcs).any(|v| f64::from(t.get(p, v)) < threshold))
        .count();
    covered as f64 / t.positions() as f64
}

fn encoding_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_dist_err = 0.0f64;
    let mut unsatisfiable = 0;
    for case in 0..200 {
        let (h, w, c) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(2..=8));
        let v = rng.gen_range(1..=6);
        let dict = random_dictionary(&mut rng, v, c as usize);
        let grids: Vec<_> = (0..rng.gen_range(1..=3))
            .map(|g| random_grid(&mut rng, &format!("g{g}"), 0, h, w, c, 0.1))
            .collect();
        let mut tensors = Vec::new();
        for grid in &grids {
            let t = compute_distances(grid, &dict).map_err(|e| e.to_string())?;
            for p in 0..grid.positions() {
                for k in 0..v {
                    let want = naive_distance(grid.feature_at(p), dict.mean(k));
                    let err = (f64::from(t.get(p, k)) - want).abs();
                    max_dist_err = max_dist_err.max(err);
                    check(err <= 1e-6, || format!("case {case}: distance {} vs {want}", t.get(p, k)))?;
                }
            }
            let threshold = rng.gen_range(0.0..2.0);
            let enc = encode(&t, threshold).map_err(|e| e.to_string())?;
            let (hh, ww) = (h as usize, w as usize);
            let mut ones = 0;
            let mut covered = 0;
            for r in 0..hh {
                for cc in 0..ww {
                    let p = r * ww + cc;
                    let mut any = false;
                    for k in 0..v {
                        let want = f64::from(t.get(p, k)) < threshold;
                        check(enc.get(r, cc, k) == want, || format!("case {case}: bit ({r},{cc},{k})"))?;
                        ones += usize::from(want);
                        any |= want;
                    }
                    covered += usize::from(any);
                }
            }
            let lat = (hh * ww) as f64;
            check((enc.coverage() - covered as f64 / lat).abs() <= 1e-6, || format!("case {case}: coverage"))?;
            check((enc.firerate() - ones as f64 / lat).abs() <= 1e-6, || format!("case {case}: firerate"))?;
            tensors.push(t);
        }
        let mean_cov = |t: f64| tensors.iter().map(|d| naive_coverage(d, t)).sum::<f64>() / tensors.len() as f64;
        match search_threshold(&tensors, 0.8, 0.001) {
            Ok(t) => {
                let i = (t / 0.001).round();
                check((t - i * 0.001).abs() < 1e-12, || format!("case {case}: T={t} off the grid"))?;
                check(mean_cov(t) >= 0.8, || format!("case {case}: T={t} misses the target"))?;
                let below = (i - 1.0) * 0.001;
                check(i == 0.0 || mean_cov(below) < 0.8, || {
                    format!("case {case}: T={t} is not minimal, {below} also reaches 0.8")
                })?;
            }
            Err(EncodingError::NoThresholdSatisfies { .. }) => {
                check(mean_cov(2.0) < 0.8, || format!("case {case}: search failed but T=2 reaches 0.8"))?;
                unsatisfiable += 1;
            }
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    Ok(format!(
        "200 instances, max distance error {max_dist_err:.1e}, thresholds minimal ({unsatisfiable} unsatisfiable)"
    ))
}

fn nonempty(rng: &mut ChaCha8Rng, h: usize, w: usize, v: usize) -> VcEncoding {
    let density = rng.gen_range(0.05..0.5);
    let mut bits = random_bits(rng, h * w * v, density);
    let i = rng.gen_range(0..bits.len());
    bits[i] = true;
    encoding(h, w, v, bits)
}

fn kernel_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sim = |a: &VcEncoding, b: &VcEncoding, r: usize| similarity(a, b, NeighborhoodSpec::new(r)).map_err(|e| e.to_string());
    for case in 0..500 {
        let (h, w, v) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=4));
        let b = nonempty(&mut rng, h, w, v);
        let bp = nonempty(&mut rng, h, w, v);
        let limit = h.min(w);
        let mut prev = -1.0;
        for r in 0..=limit {
            let k = sim(&b, &bp, r)?;
            check(k == sim(&bp, &b, r)?, || format!("case {case}: asymmetric at radius {r}"))?;
            check((0.0..=1.0).contains(&k), || format!("case {case}: K={k}"))?;
            check(sim(&b, &b, r)? == 1.0, || format!("case {case}: K(b,b) != 1"))?;
            check(k >= prev, || format!("case {case}: K fell from {prev} to {k} at radius {r}"))?;
            let want = naive_kernel(&b, &bp, r);
            check((k - want).abs() <= 1e-12, || format!("case {case}: K={k}, oracle {want}"))?;
            prev = k;
        }

        // b' is b moved one cell right; the extra column keeps every bit inside
        let (hs, ws) = (rng.gen_range(1..=5), rng.gen_range(2..=6));
        let mut bits = random_bits(&mut rng, hs * ws * v, 0.3);
        let mut shifted = vec![false; bits.len()];
        for r in 0..hs {
            for k in 0..v {
                bits[at(ws, v, r, ws - 1, k)] = false;
            }
        }
        bits[at(ws, v, rng.gen_range(0..hs), rng.gen_range(0..ws - 1), 0)] = true;
        for r in 0..hs {
            for c in 0..ws - 1 {
                for k in 0..v {
                    shifted[at(ws, v, r, c + 1, k)] = bits[at(ws, v, r, c, k)];
                }
            }
        }
        let (b, bp) = (encoding(hs, ws, v, bits), encoding(hs, ws, v, shifted));
        let k0 = sim(&b, &bp, 0)?;
        let k1 = sim(&b, &bp, 1)?;
        check(k0 < 1.0 && k1 == 1.0, || format!("case {case}: shifted pattern K0={k0} K1={k1}"))?;
    }
    let mut base = vec![false; 9];
    base[at(3, 1, 1, 0, 0)] = true;
    base[at(3, 1, 0, 0, 0)] = true;
    let mut moved = vec![false; 9];
    moved[at(3, 1, 1, 1, 0)] = true;
    moved[at(3, 1, 0, 1, 0)] = true;
    let (b, bp) = (encoding(3, 3, 1, base), encoding(3, 3, 1, moved));
    let (k0, k1) = (sim(&b, &bp, 0)?, sim(&b, &bp, 1)?);
    check(k0 == 0.0 && k1 == 1.0, || format!("3x3x1 shift: K0={k0} K1={k1}"))?;
    Ok("500 random cases: symmetric, K(b,b)=1, K in [0,1], monotone in radius, matches oracle; shifts at radius 1 give K=1".into())
}

fn likelihood_exhaustive() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut compared = 0;
    let mut near_ties = 0;
    let mut mismatches = 0;
    for round in 0..30 {
        let sigma = [1.2, 0.5, 0.0][round % 3];
        let mut support = Vec::new();
        for &cat in &[2u32, 5, 9] {
            for _ in 0..rng.gen_range(1..=4) {
                let density = rng.gen_range(0.2..0.8);
                support.push((encoding(2, 2, 2, random_bits(&mut rng, 8, density)), cat));
            }
        }
        let model = fit_likelihood(&support, sigma, 1e-3).map_err(|e| e.to_string())?;
        let thetas = naive_theta(&support, sigma, 1e-3);
        for q in 0u32..256 {
            let query = encoding(2, 2, 2, (0..8).map(|i| q >> i & 1 == 1).collect());
            let got = classify_lh(&query, &model).map_err(|e| e.to_string())?;
            let want = naive_classify_lh(&query, &thetas);
            let lls: Vec<(u32, f64)> = thetas.iter().map(|(&c, t)| (c, naive_log_likelihood(&query, t))).collect();
            let best = lls.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            for (c, t) in &thetas {
                let direct = log_likelihood(&query, model.theta(*c).unwrap()).map_err(|e| e.to_string())?;
                let want_ll = naive_log_likelihood(&query, t);
                check((direct - want_ll).abs() <= 1e-10, || format!("log-likelihood {direct} vs {want_ll}"))?;
            }
            if got != want {
                // accept only a rounding-level tie between the two categories
                let got_ll = lls.iter().find(|p| p.0 == got).unwrap().1;
                if (best - got_ll).abs() <= 1e-9 * best.abs() {
                    near_ties += 1;
                } else {
                    mismatches += 1;
                }
            }
            compared += 1;
        }
    }
    check(mismatches == 0, || format!("{mismatches} of {compared} predictions disagree"))?;
    Ok(format!("{compared} queries (30 models x 256), 0 mismatches, {near_ties} rounding-level ties"))
}

fn episode_spec(ways: usize, shots: usize, classifier: ClassifierKind) -> EpisodeSpec {
    EpisodeSpec {
        ways,
        shots,
        queries: 15,
        trials: 20,
        seed: 1,
        num_vcs: 20,
        classifier,
        ..EpisodeSpec::default()
    }
}

fn planted_parts_end_to_end() -> Verdict {
    let start = Instant::now();
    let store = PlantedParts::default().generate();
    let mut notes = Vec::new();
    for (name, kind) in [("nn", ClassifierKind::Nn), ("lh", ClassifierKind::Likelihood)] {
        let report = run_benchmark(&store, &episode_spec(5, 5, kind)).map_err(|e| e.to_string())?;
        check(report.mean_accuracy >= 0.90, || format!("{name} 5w5s accuracy {}", report.mean_accuracy))?;
        notes.push(format!("{name} {:.3}", report.mean_accuracy));

        let control = run_benchmark(&store, &EpisodeSpec {
            shuffle_support_labels: true,
            ..episode_spec(5, 5, kind)
        })
        .map_err(|e| e.to_string())?;
        let accs: Vec<f64> = control.per_trial.iter().map(|t| t.accuracy).collect();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let sd = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        check((mean - 0.2).abs() <= 3.0 * se, || {
            format!("{name} shuffled control {mean:.3} is more than 3 SE ({se:.3}) from 0.20")
        })?;
        notes.push(format!("{name} shuffled {mean:.3}±{se:.3}"));

        for (ways, shots) in [(6, 3), (8, 4)] {
            let r = run_benchmark(&store, &episode_spec(ways, shots, kind)).map_err(|e| e.to_string())?;
            let chance = 1.0 / ways as f64;
            check(r.mean_accuracy > chance + 0.5, || {
                format!("{name} {ways}w{shots}s accuracy {} barely above chance", r.mean_accuracy)
            })?;
            notes.push(format!("{name} {ways}w{shots}s {:.3}", r.mean_accuracy));
        }
    }
    within(start.elapsed(), 120)?;
    Ok(format!("{} in {:.1}s", notes.join(", "), start.elapsed().as_secs_f64()))
}

fn run_eval(store: &Path, out: &Path, threads: Option<&str>) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vcshot"));
    cmd.args(["eval", store.to_str().unwrap(), "--ways", "5", "--shots", "5", "--trials", "6", "--num-vcs", "20", "--seed", "9"])
        .arg("--out")
        .arg(out);
    match threads {
        Some(t) => cmd.env("VC_THREADS", t),
        None => cmd.env_remove("VC_THREADS"),
    };
    let status = cmd.output().map_err(|e| e.to_string())?;
    check(status.status.success(), || format!("eval failed: {}", String::from_utf8_lossy(&status.stderr)))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store_path = dir.path().join("parts.vcfs");
    let store = PlantedParts::default().generate();
    write_store(&store, File::create(&store_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let a = run_eval(&store_path, &dir.path().join("a.json"), None)?;
    let b = run_eval(&store_path, &dir.path().join("b.json"), None)?;
    let one = run_eval(&store_path, &dir.path().join("t1.json"), Some("1"))?;
    let eight = run_eval(&store_path, &dir.path().join("t8.json"), Some("8"))?;
    check(a == b, || "two identical eval runs differ".into())?;
    check(one == eight && one == a, || "VC_THREADS=1 and VC_THREADS=8 differ".into())?;

    // the chunked E-step spans several waves here
    let x = planted_clusters(32, 12, 1500, 20.0, 8).vectors;
    let config = FitConfig::new(12).with_seed(4);
    let fit_with = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| fit_vmfm(&x, &config))
            .map_err(|e| e.to_string())
    };
    let (d1, d8) = (fit_with(1)?, fit_with(8)?);
    let same = d1.means().as_slice() == d8.means().as_slice()
        && d1.concentrations() == d8.concentrations()
        && d1.weights() == d8.weights()
        && d1.fitted_log_likelihood().to_bits() == d8.fitted_log_likelihood().to_bits();
    check(same, || "dictionary fitted with 1 and 8 threads differs".into())?;
    Ok(format!(
        "eval JSON byte-identical across runs and VC_THREADS 1/8 ({} bytes); {} vectors fit bit-identically on 1 and 8 threads",
        a.len(),
        x.len()
    ))
}

const FIXTURE_SHA256: &str = "c1749fbbbfb671407e9661945169eb4a0a3f884da2c736b41091a00d81cca5c4";

fn fixture_store() -> FeatureStore {
    use vcshot::store::FeatureGrid;
    let grid = |id: &str, cat, h, w, c, data: Vec<f32>, off, stride, size| FeatureGrid {
        image_id: id.into(),
        category_id: cat,
        height: h,
        width: w,
        channels: c,
        data,
        rf_stride: stride,
        rf_size: size,
        rf_offset: off,
    };
    FeatureStore::new(
        "pool3",
        [(0, "cat".to_string()), (2, "dog".to_string())].into_iter().collect(),
        vec![
            grid("img_a", 0, 1, 2, 3, vec![0.5, -1.25, 2.0, 3.0, 0.0, -0.125], -2, 4, 10),
            grid("img_b", 2, 2, 1, 2, vec![1.5, -2.0, 3.25, 4.0], 0, 8, 36),
            grid("ü-id", 2, 2, 2, 1, vec![0.1, 0.2, 0.3, 0.4], 4, 16, 68),
        ],
    )
    .unwrap()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn vcfs_round_trip() -> Verdict {
    let fixture = to_bytes(&fixture_store());
    check(hex(&Sha256::digest(&fixture)) == FIXTURE_SHA256, || "fixture bytes differ from the reference serializer".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut error_kinds = std::collections::BTreeSet::new();
    let mut mutations = 0;
    for case in 0..200 {
        let store = random_store(&mut rng);
        let bytes = to_bytes(&store);
        let mut file = Vec::new();
        write_store(&store, &mut file).map_err(|e| e.to_string())?;
        check(file == bytes, || format!("case {case}: write_store and to_bytes disagree"))?;
        let back = read_store(bytes.as_slice()).map_err(|e| format!("case {case}: {e}"))?;
        check(to_bytes(&back) == bytes, || format!("case {case}: re-serialized bytes differ"))?;
        for (g, h) in store.grids().iter().zip(back.grids()) {
            let same = g.data.iter().zip(&h.data).all(|(a, b)| a.to_bits() == b.to_bits());
            check(same && g.image_id == h.image_id, || format!("case {case}: grid {} changed", g.image_id))?;
        }
        check(back == store, || format!("case {case}: store changed"))?;

        if case % 4 == 0 {
            for cut in 0..bytes.len() {
                match from_bytes(&bytes[..cut]) {
                    Err(e) => {
                        error_kinds.insert(format!("{e:?}").split([' ', '{', '(']).next().unwrap().to_string());
                    }
                    Ok(_) => return Err(format!("case {case}: prefix of {cut} bytes accepted")),
                }
            }
        }
        for _ in 0..50 {
            let mut bad = bytes.clone();
            match rng.gen_range(0..3) {
                0 if !bad.is_empty() => {
                    let i = rng.gen_range(0..bad.len());
                    bad[i] ^= 1 << rng.gen_range(0..8);
                }
                1 => {
                    let i = rng.gen_range(0..=bad.len());
                    bad.insert(i, rng.gen());
                }
                _ if !bad.is_empty() => {
                    let i = rng.gen_range(0..bad.len());
                    bad[i] = rng.gen();
                }
                _ => {}
            }
            let outcome = catch_unwind(AssertUnwindSafe(|| from_bytes(&bad).map_err(|e| (format!("{e:?}"), e.to_string()))));
            match outcome {
                Err(_) => return Err(format!("case {case}: decoder panicked on corrupted input")),
                Ok(Err((debug, display))) => {
                    check(!display.is_empty(), || "empty error message".into())?;
                    error_kinds.insert(debug.split([' ', '{', '(']).next().unwrap().to_string());
                }
                Ok(Ok(_)) => {}
            }
            mutations += 1;
        }
    }
    Ok(format!(
        "fixture SHA-256 matches; 200 random stores bit-exact; {mutations} corruptions without panic; errors seen: {}",
        error_kinds.into_iter().collect::<Vec<_>>().join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("1 EM monotonicity", em_monotonicity),
        ("2 vMF recovery", vmf_recovery),
        ("3 log-Bessel / density", density_correctness),
        ("4 encoding oracles", encoding_oracles),
        ("5 kernel properties", kernel_properties),
        ("6 likelihood exhaustive", likelihood_exhaustive),
        ("7 planted parts end-to-end", planted_parts_end_to_end),
        ("8 determinism", determinism),
        ("9 VCFS round-trip", vcfs_round_trip),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let verdict = catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
