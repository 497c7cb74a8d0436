//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to the
//! terminal (bypassing the test harness capture) and to
//! `$CARGO_TARGET_TMPDIR/acceptance/summary.txt`.
//!
//! Tests take a shared lock so the timed criteria never compete with the
//! training runs for the CPU.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use ssdu3d_core::eval::{cs_recon_normalized, psnr, unrolled_recon, zero_filled, CsConfig, Sparsity};
use ssdu3d_core::net::{dc_solve, CgConfig, DcProblem, ModelConfig, NetConfig, UnrolledParams};
use ssdu3d_core::phantom::{simulate_subject, Subject, SubjectSpec};
use ssdu3d_core::physics::{CoilSet, EncodingOperator};
use ssdu3d_core::sample::TrainingSample;
use ssdu3d_core::sampling::{generate_mask, retrospective_subsample, split_gaussian, SamplingMask, SplitConfig};
use ssdu3d_core::train::{normalized_l1l2, ssdu_loss, train, LossMode, TrainConfig};
use ssdu3d_core::{seeded_rng, ComplexVolume, Cplx, Dims, Real};

static LOCK: Mutex<()> = Mutex::new(());

fn exclusive() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn out_dir() -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {n} {}: {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(out_dir().join("summary.txt")).unwrap();
    let _ = f.write_all(line.as_bytes());
}

fn rand_vol(d: Dims, rng: &mut impl Rng) -> ComplexVolume {
    ComplexVolume::from_fn(d, |_, _, _| Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_coils(d: Dims, n: usize, rng: &mut impl Rng) -> CoilSet {
    CoilSet::rss_normalized((0..n).map(|_| rand_vol(d, rng)).collect()).unwrap()
}

fn random_mask(d: Dims, rng: &mut impl Rng) -> SamplingMask {
    let p = rng.random_range(0.2..0.9);
    SamplingMask::from_bits(d, (0..d.len()).map(|_| rng.random_bool(p)).collect(), (0, 0), 0).unwrap()
}

fn dot(a: &[Cplx], b: &[Cplx]) -> Cplx {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Cplx]) -> Real {
    a.iter().map(|c| c.norm_sqr()).sum::<Real>().sqrt()
}

#[test]
fn criterion_1_operator_adjointness() {
    let _g = exclusive();
    let start = Instant::now();
    let mut rng = seeded_rng(1);
    let mut worst: Real = 0.0;
    for _ in 0..100 {
        let d = Dims::new(rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=16));
        let coils = random_coils(d, rng.random_range(1..=4), &mut rng);
        let op = EncodingOperator::new(Arc::new(coils), random_mask(d, &mut rng)).unwrap();
        let x = rand_vol(d, &mut rng);
        let y: Vec<ComplexVolume> = (0..op.n_coils()).map(|_| rand_vol(d, &mut rng)).collect();
        let ex: Vec<Cplx> = op.encode(&x).unwrap().iter().flat_map(|k| k.data().to_vec()).collect();
        let yf: Vec<Cplx> = y.iter().flat_map(|k| k.data().to_vec()).collect();
        let ehy = op.adjoint(&y).unwrap();
        let gap = (dot(&ex, &yf) - dot(x.data(), ehy.data())).norm() / (norm(x.data()) * norm(&yf));
        worst = worst.max(gap);
    }
    let took = start.elapsed();
    let pass = worst < 1e-6 && took < Duration::from_secs(10);
    verdict(1, "operator adjointness", pass, &format!("100 instances, worst gap {worst:.2e} (< 1e-6), {took:.2?} (< 10s)"));
    assert!(pass);
}

#[test]
fn criterion_2_cg_matches_dense_solve() {
    let _g = exclusive();
    let start = Instant::now();
    let mut rng = seeded_rng(2);
    let d = Dims::new(4, 4, 4);
    let n = d.len();
    let mut worst: Real = 0.0;
    for _ in 0..20 {
        let coils = random_coils(d, rng.random_range(1..=4), &mut rng);
        let op = EncodingOperator::new(Arc::new(coils), random_mask(d, &mut rng)).unwrap();
        let mu = rng.random_range(0.01..1.0);
        let y: Vec<ComplexVolume> = op.encode(&rand_vol(d, &mut rng)).unwrap();
        let z = rand_vol(d, &mut rng);
        let rhs = op.adjoint(&y).unwrap();

        // explicit (EᴴE + μI), one column per basis vector
        let mut a = DMatrix::<Cplx>::zeros(n, n);
        for j in 0..n {
            let mut e = ComplexVolume::zeros(d);
            e.data_mut()[j] = Cplx::new(1.0, 0.0);
            let col = op.normal(&e).unwrap();
            for i in 0..n {
                a[(i, j)] = col.data()[i] + if i == j { Cplx::new(mu, 0.0) } else { Cplx::new(0.0, 0.0) };
            }
        }
        let b = DVector::from_iterator(n, rhs.data().iter().zip(z.data()).map(|(r, z)| r + z * mu));
        let want = a.lu().solve(&b).expect("positive definite system");
        let got = dc_solve(&DcProblem { rhs: &rhs, op: &op, mu, z: &z, cg: CgConfig { iters: 200, tol: 1e-13 } }).unwrap().x;
        let diff: Vec<Cplx> = got.data().iter().zip(want.iter()).map(|(g, w)| g - w).collect();
        worst = worst.max(norm(&diff) / want.norm());
    }
    let took = start.elapsed();
    let pass = worst < 1e-5 && took < Duration::from_secs(30);
    verdict(2, "CG vs dense solve", pass, &format!("20 instances, worst relative error {worst:.2e} (< 1e-5), {took:.2?} (< 30s)"));
    assert!(pass);
}

#[test]
fn criterion_3_end_to_end_gradient_check() {
    let _g = exclusive();
    let start = Instant::now();
    let d = Dims::new(4, 4, 4);
    let mut rng = seeded_rng(3);
    let truth = rand_vol(d, &mut rng);
    let coils = random_coils(d, 2, &mut rng);
    let mask = SamplingMask::from_bits(d, (0..d.len()).map(|_| rng.random_bool(0.6)).collect(), (0, 0), 0).unwrap();
    let op = EncodingOperator::new(Arc::new(coils.clone()), mask.clone()).unwrap();
    let k = op.encode(&truth).unwrap();
    let split = split_gaussian(&mask, &SplitConfig { keep_acs_in_theta: false, seed: 3, ..Default::default() }).unwrap();
    let sample = TrainingSample::new(k, Arc::new(coils), mask, split, Some(truth), 0, 0, 1.0).unwrap();
    let cfg = ModelConfig {
        net: NetConfig { n_blocks: 2, channels: 4, block_scale: 0.5 },
        unrolls: 2,
        cg: CgConfig { iters: 8, tol: 0.0 },
        mu_init: 0.5,
    };
    let params = UnrolledParams::init(cfg, 4).unwrap();
    let grads = ssdu_loss(&sample, &params).unwrap().gradients().unwrap();
    let h = 1e-4;
    let mut worst = (String::new(), 0.0_f64);
    for (g, (info, ad)) in params.groups_info().iter().zip(&grads).enumerate() {
        let fd: Vec<Real> = (0..ad.len())
            .map(|i| {
                let eval = |delta: Real| {
                    let mut p = params.clone();
                    p.groups_mut()[g][i] += delta;
                    ssdu_loss(&sample, &p).unwrap().value()
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            })
            .collect();
        // entry-wise gap relative to the group's largest derivative
        let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = ad.iter().zip(&fd).fold(0.0_f64, |m, (a, f)| m.max((a - f).abs())) / scale;
        if err >= worst.1 {
            worst = (info.name.clone(), err);
        }
    }
    let took = start.elapsed();
    let pass = worst.1 < 1e-3 && took < Duration::from_secs(300);
    verdict(
        3,
        "gradient check",
        pass,
        &format!("{} groups, worst {} at {:.2e} (< 1e-3), {took:.2?} (< 5min)", grads.len(), worst.0, worst.1),
    );
    assert!(pass);
}

#[test]
fn criterion_4_mask_split_partition() {
    let _g = exclusive();
    let d = Dims::new(8, 24, 16);
    let mut failures = 0;
    for seed in 0..1000u64 {
        let omega = generate_mask(d, 3.0, (6, 4), 0, seed).unwrap();
        let s = split_gaussian(&omega, &SplitConfig { seed: seed + 7, ..Default::default() }).unwrap();
        let eligible = (0..d.len()).filter(|&i| omega.get(i) && !omega.in_acs(i)).count();
        let (t, l, o) = (s.theta.bits(), s.lam.bits(), omega.bits());
        let disjoint = t.iter().zip(l).all(|(&a, &b)| !(a && b));
        let cover = t.iter().zip(l).zip(o).all(|((&a, &b), &w)| (a || b) == w);
        // ⌈0.4·n⌉ = ⌈2n/5⌉ in integers
        let size = s.lam.count() == (2 * eligible).div_ceil(5);
        failures += !(disjoint && cover && size) as usize;
    }
    let pass = failures == 0;
    verdict(4, "mask split partition", pass, &format!("1000 seeded splits, {failures} violations"));
    assert!(pass);
}

#[test]
fn criterion_5_loss_arithmetic() {
    let _g = exclusive();
    let c = Cplx::new;
    let mut rng = seeded_rng(5);
    let u: Vec<Cplx> = (0..50).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let cases = [
        ("v = u", normalized_l1l2(&u, &u).unwrap(), 0.0),
        ("v = 0", normalized_l1l2(&u, &vec![c(0.0, 0.0); 50]).unwrap(), 2.0),
        ("u=(3,4i), v=0", normalized_l1l2(&[c(3.0, 0.0), c(0.0, 4.0)], &[c(0.0, 0.0); 2]).unwrap(), 2.0),
        ("u=(3,4i), v=(3,0)", normalized_l1l2(&[c(3.0, 0.0), c(0.0, 4.0)], &[c(3.0, 0.0), c(0.0, 0.0)]).unwrap(), 0.8 + 4.0 / 7.0),
    ];
    let worst = cases.iter().map(|(_, got, want): &(&str, Real, Real)| (got - want).abs()).fold(0.0, Real::max);
    let pass = worst < 1e-9;
    let detail: Vec<String> = cases.iter().map(|(n, g, _)| format!("{n} -> {g:.10}")).collect();
    verdict(5, "loss arithmetic", pass, &format!("{}; worst gap {worst:.1e}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_9_retrospective_subsampling() {
    let _g = exclusive();
    let d = Dims::new(32, 64, 48);
    let mut failures = 0;
    for seed in 0..100u64 {
        let r3 = generate_mask(d, 3.0, (10, 6), 0, seed).unwrap();
        let r6 = retrospective_subsample(&r3, 6.0, (6, 6), seed ^ 0xabc).unwrap();
        let strict = r6.is_subset_of(&r3) && r6.count() < r3.count();
        let (r1, r2) = r6.acs_ranges();
        let plane = r6.plane();
        let (_, n2) = r6.plane_dims();
        let acs_kept = r1.clone().all(|a| r2.clone().all(|b| plane[a * n2 + b])) && r1.len() == 6 && r2.len() == 6;
        let budget = plane.iter().filter(|&&b| b).count() == ((64 * 48) as f64 / 6.0).round() as usize;
        failures += !(strict && acs_kept && budget && r6.is_readout_constant()) as usize;
    }
    let pass = failures == 0;
    verdict(9, "retrospective subsampling", pass, &format!("100 seeds R=3 (ACS 10x6) -> R=6 (ACS 6x6), {failures} violations"));
    assert!(pass);
}

// ---- criteria 6 and 7: the synthetic reconstruction suite ----

/// Frozen suite definition.
const SUITE_SEED: u64 = 2024;
const TRAIN_SUBJECTS: [u32; 3] = [0, 1, 2];
const TUNE_SUBJECT: u32 = 50;
const TEST_SUBJECTS: [u32; 5] = [100, 101, 102, 103, 104];
const SLAB_LEN: usize = 8;
const CS_ITERATIONS: usize = 30;
const CS_LAMBDAS: [Real; 4] = [0.003, 0.01, 0.03, 0.1];

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn desk_train_config(loss: LossMode) -> TrainConfig {
    let text = std::fs::read_to_string(configs().join("train_desk.json")).unwrap();
    let cfg: TrainConfig = ssdu3d::config::parse_config(&text, "train_desk.json").unwrap();
    TrainConfig { loss, ..cfg }
}

#[derive(Debug, Serialize, Deserialize)]
struct SubjectScores {
    id: u32,
    zero_filled_r6: Real,
    cs_r6: Real,
    cs_r3: Real,
    ssdu_r6: Real,
    supervised_r6: Real,
}

#[derive(Debug, Serialize, Deserialize)]
struct Suite {
    cs_choice: String,
    tuning: Vec<(String, Real)>,
    train_losses_ssdu: Vec<Real>,
    train_losses_supervised: Vec<Real>,
    train_seconds: (Real, Real),
    subjects: Vec<SubjectScores>,
    seconds: Real,
}

impl Suite {
    fn mean(&self, f: fn(&SubjectScores) -> Real) -> Real {
        self.subjects.iter().map(f).sum::<Real>() / self.subjects.len() as Real
    }
}

fn operator(s: &Subject) -> EncodingOperator {
    EncodingOperator::new(Arc::new(s.coils.clone()), s.mask.clone()).unwrap()
}

fn run_suite() -> Suite {
    let start = Instant::now();
    let r6 = SubjectSpec::default();
    let r3 = SubjectSpec { retrospective: None, ..SubjectSpec::default() };
    let log = |m: String| {
        let _ = std::io::stderr().write_all(format!("[suite {:>7.1}s] {m}\n", start.elapsed().as_secs_f64()).as_bytes());
    };

    // CS transform and λ, tuned at R=3 on a subject outside the test set
    let tune = simulate_subject(&r3, TUNE_SUBJECT, SUITE_SEED).unwrap();
    let tune_op = operator(&tune);
    let mut tuning = Vec::new();
    let mut best: Option<(Real, CsConfig)> = None;
    for transform in [Sparsity::Haar { levels: 3 }, Sparsity::TotalVariation { inner_iters: 10 }] {
        for lambda in CS_LAMBDAS {
            let cfg = CsConfig { transform, lambda, iterations: CS_ITERATIONS, step: None };
            let p = psnr(&cs_recon_normalized(&tune.kspace, &tune_op, &cfg).unwrap().image, &tune.truth).unwrap();
            tuning.push((format!("{transform:?} λ={lambda}"), p));
            log(format!("tune {transform:?} λ={lambda}: {p:.2} dB"));
            if best.as_ref().is_none_or(|(b, _)| p > *b) {
                best = Some((p, cfg));
            }
        }
    }
    let cs = best.unwrap().1;

    let mut train_set = Vec::new();
    for id in TRAIN_SUBJECTS {
        let s = simulate_subject(&r6, id, SUITE_SEED).unwrap();
        train_set.extend(s.training_samples(SLAB_LEN, SLAB_LEN, &desk_train_config(LossMode::SelfSupervised).split).unwrap());
    }
    let mut trained = Vec::new();
    for mode in [LossMode::SelfSupervised, LossMode::Supervised] {
        let t = Instant::now();
        let (params, history) = train(&train_set, &desk_train_config(mode)).unwrap();
        let secs = t.elapsed().as_secs_f64();
        log(format!("{mode:?} training: {secs:.0}s, losses {:?}", history.epoch_losses));
        trained.push((params, history.epoch_losses, secs));
    }

    let mut subjects = Vec::new();
    for id in TEST_SUBJECTS {
        let s6 = simulate_subject(&r6, id, SUITE_SEED).unwrap();
        let s3 = simulate_subject(&r3, id, SUITE_SEED).unwrap();
        let (op6, op3) = (operator(&s6), operator(&s3));
        let score = |x: &ComplexVolume| psnr(x, &s6.truth).unwrap();
        let row = SubjectScores {
            id,
            zero_filled_r6: score(&zero_filled(&s6.kspace, &op6).unwrap()),
            cs_r6: score(&cs_recon_normalized(&s6.kspace, &op6, &cs).unwrap().image),
            cs_r3: score(&cs_recon_normalized(&s3.kspace, &op3, &cs).unwrap().image),
            ssdu_r6: score(&unrolled_recon(&s6.kspace, &op6, &trained[0].0).unwrap()),
            supervised_r6: score(&unrolled_recon(&s6.kspace, &op6, &trained[1].0).unwrap()),
        };
        log(format!("{row:?}"));
        subjects.push(row);
    }
    let [(_, l_ssdu, t_ssdu), (_, l_sup, t_sup)] = <[_; 2]>::try_from(trained).ok().unwrap();
    let suite = Suite {
        cs_choice: format!("{:?} λ={}", cs.transform, cs.lambda),
        tuning,
        train_losses_ssdu: l_ssdu,
        train_losses_supervised: l_sup,
        train_seconds: (t_ssdu, t_sup),
        subjects,
        seconds: start.elapsed().as_secs_f64(),
    };
    std::fs::write(out_dir().join("suite.json"), serde_json::to_string_pretty(&suite).unwrap()).unwrap();
    suite
}

/// Means from the recorded run in `tests/data/suite_reference.json`, shown
/// next to fresh results. Never asserted on.
fn reference(f: fn(&SubjectScores) -> Real) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/suite_reference.json");
    match std::fs::read(&path).ok().and_then(|b| serde_json::from_slice::<Suite>(&b).ok()) {
        Some(r) => format!("{:.2}", r.mean(f)),
        None => "n/a".into(),
    }
}

fn suite() -> &'static Suite {
    static SUITE: OnceLock<Suite> = OnceLock::new();
    SUITE.get_or_init(run_suite)
}

#[test]
fn criterion_6_reconstruction_ordering() {
    let _g = exclusive();
    let s = suite();
    let (ssdu, cs, zf, cs3) = (s.mean(|r| r.ssdu_r6), s.mean(|r| r.cs_r6), s.mean(|r| r.zero_filled_r6), s.mean(|r| r.cs_r3));
    let pass = ssdu - cs >= 1.0 && ssdu - zf >= 1.0;
    verdict(
        6,
        "reconstruction ordering",
        pass,
        &format!(
            "mean PSNR at R=6: self-supervised {ssdu:.2}, CS [{}] {cs:.2}, zero-filled {zf:.2} dB; margins {:+.2} / {:+.2} (need >= 1); \
             CS on R=3 data {cs3:.2} dB (informational); recorded run: self-supervised {}, CS {}, zero-filled {}",
            s.cs_choice,
            ssdu - cs,
            ssdu - zf,
            reference(|r| r.ssdu_r6),
            reference(|r| r.cs_r6),
            reference(|r| r.zero_filled_r6),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_supervised_gap() {
    let _g = exclusive();
    let s = suite();
    let (ssdu, sup) = (s.mean(|r| r.ssdu_r6), s.mean(|r| r.supervised_r6));
    let pass = sup - ssdu <= 3.0;
    verdict(
        7,
        "supervised vs self-supervised",
        pass,
        &format!(
            "mean PSNR supervised {sup:.2}, self-supervised {ssdu:.2} dB; gap {:+.2} (need <= 3); recorded run: supervised {}, self-supervised {}",
            sup - ssdu,
            reference(|r| r.supervised_r6),
            reference(|r| r.ssdu_r6),
        ),
    );
    assert!(pass);
}

// ---- criterion 8: determinism through the command-line tool ----

fn cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_ssdu3d")).args(args).output().unwrap();
    assert!(out.status.success(), "ssdu3d {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let p = |n: &str| dir.join(n).to_str().unwrap().to_string();
    let sim = configs().join("simulate_smoke.json");
    let train = configs().join("train_desk.json");
    cli(&["simulate", "--deterministic", "--seed", "8", "--config", sim.to_str().unwrap(), "--out", &p("d.ssdu3d")]);
    cli(&["train", "--deterministic", "--seed", "8", "--epochs", "2", "--config", train.to_str().unwrap(), "--data", &p("d.ssdu3d"), "--out", &p("m.ckpt")]);
    cli(&["reconstruct", "--deterministic", "--checkpoint", &p("m.ckpt"), "--data", &p("d.ssdu3d"), "--out", &p("recon")]);
    let mut files = vec![dir.join("d.ssdu3d"), dir.join("m.ckpt")];
    let mut recon: Vec<PathBuf> = std::fs::read_dir(dir.join("recon"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "raw" || e == "png"))
        .collect();
    recon.sort();
    files.extend(recon);
    files.into_iter().map(|f| (f.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&f).unwrap())).collect()
}

#[test]
fn criterion_8_pipeline_determinism() {
    let _g = exclusive();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (pipeline(a.path()), pipeline(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let pass = fa.len() == fb.len() && differing.is_empty() && fa.len() >= 4;
    verdict(8, "pipeline determinism", pass, &format!("{} files compared byte for byte ({}), differing: {differing:?}", fa.len(), names.join(", ")));
    assert!(pass);
}
