//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`).

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twincover::encoder::{
    conjugacy_check, decode_psi, encode, encode_zero_dim, verify_conditions, Encoding,
};
use twincover::graph_core::{is_graph_cover, Graph, GraphHom, Vertex};
use twincover::limit_engine::{GraphSequence, SequenceKind};
use twincover::systems::rat::{rat, two_pow_neg};
use twincover::systems::{self, FiniteSystem, OpenSet, PlIntervalMap, ShiftSystem, System};
use twincover::twinned_engine::TwinnedSequence;
use twincover::Thread;

/// Shared encodings: several criteria exercise the same bundles, and the
/// larger ones take seconds to build.
fn shared(
    slot: &'static std::sync::OnceLock<Encoding>,
    sys: fn() -> System,
    depth: usize,
) -> &'static Encoding {
    slot.get_or_init(|| encode(&sys(), depth).expect("encoder output"))
}

static SWAP5: std::sync::OnceLock<Encoding> = std::sync::OnceLock::new();
static FULL2_5: std::sync::OnceLock<Encoding> = std::sync::OnceLock::new();
static GENTLE4: std::sync::OnceLock<Encoding> = std::sync::OnceLock::new();
static TENT3: std::sync::OnceLock<Encoding> = std::sync::OnceLock::new();

fn swap5() -> &'static Encoding {
    shared(&SWAP5, swap_sys, 5)
}

fn full2_5() -> &'static Encoding {
    shared(&FULL2_5, full2_sys, 5)
}

fn gentle4() -> &'static Encoding {
    shared(&GENTLE4, gentle_sys, 4)
}

fn tent3() -> &'static Encoding {
    shared(&TENT3, tent_sys, 3)
}

fn criterion(n: u32, name: &str, run: impl FnOnce() -> Result<(), String>) {
    match run() {
        Ok(()) => println!("ACCEPTANCE {n} ({name}): PASS"),
        Err(e) => {
            println!("ACCEPTANCE {n} ({name}): FAIL - {e}");
            panic!("acceptance criterion {n} ({name}) failed: {e}");
        }
    }
}

fn swap_sys() -> System {
    System::Finite(FiniteSystem::swap())
}

fn tent_sys() -> System {
    System::PlInterval(PlIntervalMap::tent())
}

fn gentle_sys() -> System {
    System::PlInterval(
        PlIntervalMap::new(vec![rat(0, 1), rat(1, 1)], vec![rat(1, 4), rat(3, 4)]).unwrap(),
    )
}

fn full2_sys() -> System {
    System::Shift(ShiftSystem::full_two())
}

fn axiom_suite(enc: &Encoding, label: &str) -> Result<(), String> {
    let v = enc.twinned().validate();
    if !v.is_empty() {
        return Err(format!("{label}: axiom violation: {}", v[0]));
    }
    let c = verify_conditions(enc.system(), enc.levels());
    if !c.is_empty() {
        return Err(format!("{label}: condition violation: {}", c[0]));
    }
    Ok(())
}

#[test]
fn acceptance_1_axiom_suite_all_backends() {
    criterion(1, "axiom suite on all backends at depth >= 4", || {
        axiom_suite(swap5(), "finite swap depth 5")?;
        let full4 = encode(&full2_sys(), 4).map_err(|e| format!("full 2-shift: {e}"))?;
        axiom_suite(&full4, "full 2-shift depth 4")?;
        axiom_suite(gentle4(), "pl slope-1/2 depth 4")?;
        Ok(())
    });
}

#[test]
fn acceptance_2_zero_dim_characterization() {
    criterion(2, "zero-dimensional clopen path", || {
        let depth = 8;
        let full = encode_zero_dim(&full2_sys(), depth).map_err(|e| e.to_string())?;
        for (i, g) in full.levels().iter().enumerate().skip(1) {
            if g.vertices().len() != 1 << i {
                return Err(format!("full shift level {i}: {} vertices", g.vertices().len()));
            }
            if g.edges().len() != 1 << (i + 1) {
                return Err(format!("full shift level {i}: {} edges", g.edges().len()));
            }
        }
        let golden = encode_zero_dim(&System::Shift(ShiftSystem::golden_mean()), depth)
            .map_err(|e| e.to_string())?;
        let counts: Vec<usize> = (1..=4).map(|i| golden.levels()[i].vertices().len()).collect();
        if counts != vec![2, 3, 5, 8] {
            return Err(format!("golden mean counts {counts:?} != [2, 3, 5, 8]"));
        }
        for seq in [&full, &golden] {
            for i in 1..=depth {
                if !is_graph_cover(seq.bonding(i)) {
                    return Err(format!("bonding {i} is not a graph cover"));
                }
            }
            // cover_successor must act as the shift on words
            for n in 1..=depth {
                for w in seq.levels()[n].vertices() {
                    let t = seq.thread(n, w).map_err(|e| e.to_string())?;
                    let succ = seq.cover_successor(&t).map_err(|e| e.to_string())?;
                    let expected = if n == 1 { "ε".to_string() } else { w[1..].to_string() };
                    if succ.last != expected {
                        return Err(format!(
                            "shift of {w} gave {} instead of {expected} at depth {n}",
                            succ.last
                        ));
                    }
                }
            }
        }
        Ok(())
    });
}

/// A random 4-level cover sequence (≤ 12 vertices per level), built by
/// fiber-lifting: every vertex of the lift picks one target successor in
/// the base (+directionality), every base edge gets a preimage
/// (edge-surjectivity of the map), every lift vertex gets an in-edge
/// (edge-surjectivity of the graph).
fn random_cover_tower(rng: &mut ChaCha8Rng) -> GraphSequence {
    // base: 1-3 vertices, functional graph plus patches for in-edges
    let k = rng.gen_range(1..=3usize);
    let base_verts: Vec<Vertex> = (0..k).map(|i| format!("l0_{i}")).collect();
    let mut edges: BTreeSet<(Vertex, Vertex)> = (0..k)
        .map(|i| (base_verts[i].clone(), base_verts[rng.gen_range(0..k)].clone()))
        .collect();
    for v in &base_verts {
        if !edges.iter().any(|(_, b)| b == v) {
            edges.insert((base_verts[rng.gen_range(0..k)].clone(), v.clone()));
        }
    }
    let mut levels = vec![Graph::directed(base_verts, edges).unwrap()];
    let mut bonding = Vec::new();
    for level in 1..4 {
        let base = levels[level - 1].clone();
        let vs: Vec<&Vertex> = base.vertices().iter().collect();
        // fibers: at least outdeg(a) elements each, total capped at 12
        let out: BTreeMap<&Vertex, Vec<&Vertex>> = vs
            .iter()
            .map(|a| (*a, base.out_neighbors(a).collect::<Vec<_>>()))
            .collect();
        let mut budget = 12usize.saturating_sub(vs.iter().map(|a| out[*a].len()).sum());
        let mut verts: Vec<Vertex> = Vec::new();
        let mut map: BTreeMap<Vertex, Vertex> = BTreeMap::new();
        // chosen[x] = the base successor all out-edges of x project to
        let mut chosen: BTreeMap<Vertex, Vertex> = BTreeMap::new();
        let mut fibers: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
        for a in &vs {
            let extra = if budget > 0 { rng.gen_range(0..=budget.min(2)) } else { 0 };
            budget -= extra;
            let size = out[*a].len() + extra;
            for j in 0..size {
                let x = format!("l{level}_{}", verts.len());
                // first outdeg(a) fiber elements cover out(a); the rest pick freely
                let target = if j < out[*a].len() {
                    out[*a][j].clone()
                } else {
                    out[*a][rng.gen_range(0..out[*a].len())].clone()
                };
                chosen.insert(x.clone(), target);
                map.insert(x.clone(), (*a).clone());
                fibers.entry((*a).clone()).or_default().push(x.clone());
                verts.push(x);
            }
        }
        // edges: each x points into a nonempty random subset of fiber(chosen[x])
        let mut edges: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
        for x in &verts {
            let heads = &fibers[&chosen[x]];
            let mut any = false;
            for y in heads {
                if rng.gen_bool(0.5) {
                    edges.insert((x.clone(), y.clone()));
                    any = true;
                }
            }
            if !any {
                edges.insert((x.clone(), heads[rng.gen_range(0..heads.len())].clone()));
            }
        }
        // patch in-edges: every y must be hit by some x with chosen[x] = parent(y)
        for y in &verts {
            if !edges.iter().any(|(_, b)| b == y) {
                let b = &map[y];
                let xs: Vec<&Vertex> = verts.iter().filter(|x| &chosen[*x] == b).collect();
                edges.insert((xs[rng.gen_range(0..xs.len())].clone(), y.clone()));
            }
        }
        let lift = Graph::directed(verts, edges).unwrap();
        bonding.push(GraphHom::new(lift.clone(), base, map).unwrap());
        levels.push(lift);
    }
    GraphSequence::new(levels, bonding, SequenceKind::Covers).unwrap()
}

#[test]
fn acceptance_3_random_cover_determinism() {
    criterion(3, "determinism on 100 random cover sequences", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2026);
        for case in 0..100 {
            let seq = random_cover_tower(&mut rng);
            let v = seq.validate();
            if !v.is_empty() {
                return Err(format!("case {case}: generator produced invalid cover: {}", v[0]));
            }
            for n in 1..=seq.max_depth() {
                for t in seq.enumerate_threads(n).map_err(|e| e.to_string())? {
                    seq.cover_successor(&t)
                        .map_err(|e| format!("case {case}: not single-valued: {e}"))?;
                }
                if !seq.surjectivity_at_depth(n).map_err(|e| e.to_string())? {
                    return Err(format!("case {case}: successor map not surjective at {n}"));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn acceptance_4_cover_composition() {
    criterion(4, "composition of covers is a cover, 100 pairs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(4096);
        for case in 0..50 {
            let seq = random_cover_tower(&mut rng);
            for (hi, lo) in [(2usize, 1usize), (3, 2)] {
                let comp = seq
                    .bonding(hi)
                    .then(seq.bonding(lo))
                    .map_err(|e| format!("case {case}: {e}"))?;
                if !is_graph_cover(&comp) {
                    return Err(format!("case {case}: composition {hi}->{} fails", lo - 1));
                }
            }
        }
        Ok(())
    });
}

/// All self-maps of {0, …, k-1} as target index vectors.
fn all_maps(k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|m| {
                (0..k).map(move |t| {
                    let mut m2 = m.clone();
                    m2.push(t);
                    m2
                })
            })
            .collect();
    }
    out
}

fn finite_system(k: usize, map_idx: &[usize]) -> System {
    let points: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    let metric: Vec<Vec<_>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { rat(0, 1) } else { rat(1, 1) }).collect())
        .collect();
    let map: BTreeMap<String, String> = (0..k)
        .map(|i| (points[i].clone(), points[map_idx[i]].clone()))
        .collect();
    System::Finite(FiniteSystem::new(points, metric, map).unwrap())
}

/// decode a class of singletons to its unique point name
fn class_point(enc: &Encoding, depth: usize, members: &BTreeSet<Vertex>) -> Result<String, String> {
    let mut found: Option<String> = None;
    for m in members {
        let t = Thread {
            depth,
            last: m.clone(),
        };
        let e = decode_psi(enc, &t).map_err(|e| e.to_string())?;
        let OpenSet::Finite { points } = e else {
            return Err("non-finite enclosure".into());
        };
        if points.len() != 1 {
            return Err(format!("enclosure {points:?} is not a singleton"));
        }
        let p = points.into_iter().next().unwrap();
        match &found {
            None => found = Some(p),
            Some(q) if *q != p => return Err("class decodes to two points".into()),
            _ => {}
        }
    }
    found.ok_or_else(|| "empty class".into())
}

fn check_finite_conjugacy(sys: &System, label: &str) -> Result<(), String> {
    let System::Finite(f) = sys else { unreachable!() };
    let size = f.points().len();
    let enc = encode(sys, 3).map_err(|e| format!("{label}: {e}"))?;
    let ts = enc.twinned();
    // n* = 2: classes are singletons from depth 1 on, and t_step lands at
    // depth 1 where decoding is still point-valued
    let n_star = (1..=3)
        .find(|&n| {
            n >= 2
                && ts
                    .quotient_at_depth(n)
                    .map(|q| q.len() == size)
                    .unwrap_or(false)
        })
        .ok_or_else(|| format!("{label}: no depth <= 6 with {size} classes"))?;
    for class in ts.quotient_at_depth(n_star).map_err(|e| e.to_string())? {
        let x = class_point(&enc, n_star, &class.members).map_err(|e| format!("{label}: {e}"))?;
        let image = ts.t_step(&class).map_err(|e| format!("{label}: {e}"))?;
        let y = class_point(&enc, n_star - 1, &image.members).map_err(|e| format!("{label}: {e}"))?;
        let expected = f.apply(&x);
        if y != expected {
            return Err(format!("{label}: T({x}) = {y} but f({x}) = {expected}"));
        }
    }
    Ok(())
}

#[test]
fn acceptance_5_finite_exact_conjugacy() {
    criterion(5, "finite systems: T equals f exactly", || {
        for k in 1..=3usize {
            for m in all_maps(k) {
                check_finite_conjugacy(&finite_system(k, &m), &format!("|X|={k} map {m:?}"))?;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for k in 4..=6usize {
            for case in 0..50 {
                let m: Vec<usize> = (0..k).map(|_| rng.gen_range(0..k)).collect();
                check_finite_conjugacy(
                    &finite_system(k, &m),
                    &format!("|X|={k} case {case} map {m:?}"),
                )?;
            }
        }
        Ok(())
    });
}

#[test]
fn acceptance_6_tent_enclosure_contraction() {
    criterion(6, "tent map enclosures contract and commute", || {
        let sys = tent_sys();
        let depth = 3;
        let enc = tent3();
        for n in 0..=depth {
            let bound = two_pow_neg(n as u32);
            for v in enc.twinned().g_levels()[n].vertices() {
                let t = enc.twinned().thread(n, v).map_err(|e| e.to_string())?;
                let e = decode_psi(&enc, &t).map_err(|e| e.to_string())?;
                let d = systems::diam(&sys, &e).map_err(|e| e.to_string())?;
                if d > bound {
                    return Err(format!("thread {v} at depth {n}: diameter {d} > 2^-{n}"));
                }
            }
        }
        let report = conjugacy_check(&enc, depth, 20, 1234).map_err(|e| e.to_string())?;
        if report.samples.len() != 20 {
            return Err(format!("only {} samples drawn", report.samples.len()));
        }
        for s in &report.samples {
            if !s.commutes {
                return Err(format!("sample {}: image does not meet the stepped class", s.thread));
            }
            if !s.within_bound {
                return Err(format!("sample {}: enclosure exceeds 2^-{}", s.thread, depth - 1));
            }
        }
        Ok(())
    });
}

/// A twinned sequence violating DS3: an F-edge at level 1 whose
/// G-successors are not F-related at level 0 is impossible (level 0 is a
/// root), so the violation is staged at level 2 over a two-vertex level 1.
fn ds3_violating() -> TwinnedSequence {
    let g0 = Graph::directed(["r".to_string()], [("r".to_string(), "r".to_string())]).unwrap();
    let f0 = Graph::symmetric(["r".to_string()], [("r".to_string(), "r".to_string())]).unwrap();
    let vs1: Vec<String> = vec!["a".into(), "b".into()];
    let g1 = Graph::directed(
        vs1.clone(),
        [
            ("a".to_string(), "a".to_string()),
            ("b".to_string(), "b".to_string()),
        ],
    )
    .unwrap();
    // level-1 F: only the loops — a and b are far apart
    let f1 = Graph::symmetric(
        vs1.clone(),
        [
            ("a".to_string(), "a".to_string()),
            ("b".to_string(), "b".to_string()),
        ],
    )
    .unwrap();
    let vs2: Vec<String> = vec!["a0".into(), "b0".into()];
    let g2 = Graph::directed(
        vs2.clone(),
        [
            ("a0".to_string(), "a0".to_string()),
            ("b0".to_string(), "b0".to_string()),
        ],
    )
    .unwrap();
    // F-edge between a0 and b0 upstairs with no F-edge between a and b
    // downstairs: DS3 (and DS3b) fail at level 2
    let f2 = Graph::symmetric(
        vs2.clone(),
        [
            ("a0".to_string(), "a0".to_string()),
            ("b0".to_string(), "b0".to_string()),
            ("a0".to_string(), "b0".to_string()),
        ],
    )
    .unwrap();
    let phi1 = GraphHom::new(
        g1.clone(),
        g0.clone(),
        [("a".to_string(), "r".to_string()), ("b".to_string(), "r".to_string())],
    )
    .unwrap();
    let phi2 = GraphHom::new(
        g2.clone(),
        g1.clone(),
        [("a0".to_string(), "a".to_string()), ("b0".to_string(), "b".to_string())],
    )
    .unwrap();
    TwinnedSequence::new(vec![g0, g1, g2], vec![f0, f1, f2], vec![phi1, phi2]).unwrap()
}

#[test]
fn acceptance_7_continuity_and_saturation() {
    criterion(7, "continuity and saturation machinery", || {
        let gentle3 = encode(&gentle_sys(), 3).map_err(|e| format!("pl slope-1/2: {e}"))?;
        let tent2 = encode(&tent_sys(), 2).map_err(|e| format!("tent: {e}"))?;
        let bundles: Vec<(&str, &Encoding, usize)> = vec![
            ("finite swap", swap5(), 5),
            ("full 2-shift", full2_5(), 5),
            ("pl slope-1/2", &gentle3, 3),
            ("tent", &tent2, 2),
        ];
        for (label, enc, cap) in bundles {
            let ts = enc.twinned();
            for k in 0..cap {
                if let Some((t, w)) = ts
                    .continuity_check_exhaustive(k, cap)
                    .map_err(|e| e.to_string())?
                {
                    return Err(format!(
                        "{label}: continuity fails for {} (k={k}): successor {} of {} at level {}",
                        t.last, w.successor, w.source, w.level
                    ));
                }
            }
            if let Some(t) = ts
                .saturation_check_exhaustive(0, cap)
                .map_err(|e| e.to_string())?
            {
                return Err(format!("{label}: thread {} not saturated", t.last));
            }
        }
        // the DS3-violating fixture must fail with a witness
        let bad = ds3_violating();
        if bad.validate().iter().all(|v| v.axiom.to_string() != "DS3") {
            return Err("fixture does not violate DS3".into());
        }
        match bad.continuity_check_exhaustive(1, 2).map_err(|e| e.to_string())? {
            Some(_) => Ok(()),
            None => Err("DS3-violating fixture passes the continuity check".into()),
        }
    });
}

#[test]
fn acceptance_8_raw_chain_projection() {
    criterion(8, "raw F-chains project one level down", || {
        let bundles: Vec<(&str, &Encoding, usize)> = vec![
            ("finite swap", swap5(), 5),
            ("full 2-shift", full2_5(), 5),
            ("pl slope-1/2", gentle4(), 4),
            ("tent", tent3(), 3),
        ];
        for (label, enc, depth) in bundles {
            for n in 1..=depth {
                if let Some((x, y, z)) = enc
                    .twinned()
                    .raw_chain_projection_witness(n)
                    .map_err(|e| e.to_string())?
                {
                    return Err(format!("{label}: chain {x} ~ {y} ~ {z} stuck at depth {n}"));
                }
            }
        }
        Ok(())
    });
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_twincover"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        format!(
            "{}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        ),
    )
}

#[test]
fn acceptance_9_cli_round_trip() {
    criterion(9, "CLI encode/validate/check round trip + tamper", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cases: Vec<(&str, System, usize)> = vec![
            ("swap", swap_sys(), 3),
            ("full2", full2_sys(), 2),
            ("gentle", gentle_sys(), 2),
        ];
        for (name, sys, depth) in cases {
            let spec = dir.path().join(format!("{name}.json"));
            std::fs::write(&spec, serde_json::to_string(&sys).unwrap()).map_err(|e| e.to_string())?;
            let bundle = dir.path().join(format!("{name}.enc.json"));
            let (code, log) = run_cli(&[
                "encode",
                spec.to_str().unwrap(),
                "--depth",
                &depth.to_string(),
                "--out",
                bundle.to_str().unwrap(),
            ]);
            if code != 0 {
                return Err(format!("{name}: encode exited {code}: {log}"));
            }
            for cmd in ["validate", "check"] {
                let (code, log) = run_cli(&[cmd, bundle.to_str().unwrap()]);
                if code != 0 {
                    return Err(format!("{name}: {cmd} exited {code}: {log}"));
                }
            }
            // tamper one G-edge and, separately, one F-edge
            let raw: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(&bundle).unwrap()).unwrap();
            for field in ["g_levels", "f_levels"] {
                let mut tampered = raw.clone();
                let edges = tampered["twinned"][field][depth]["edges"]
                    .as_array_mut()
                    .ok_or("missing edges")?;
                if edges.is_empty() {
                    return Err(format!("{name}: no edges to tamper"));
                }
                let victim = edges.remove(edges.len() / 2);
                if field == "f_levels" {
                    // F-edges are unordered pairs stored in both orientations
                    let flipped =
                        serde_json::json!([victim[1].clone(), victim[0].clone()]);
                    edges.retain(|e| *e != flipped);
                }
                let bad = dir.path().join(format!("{name}.bad.json"));
                std::fs::write(&bad, serde_json::to_string(&tampered).unwrap())
                    .map_err(|e| e.to_string())?;
                // pipeline exit: first nonzero of validate, check
                let (vcode, _) = run_cli(&["validate", bad.to_str().unwrap()]);
                let pipeline = if vcode != 0 {
                    vcode
                } else {
                    run_cli(&["check", bad.to_str().unwrap()]).0
                };
                if pipeline != 1 {
                    return Err(format!(
                        "{name}: tampered {field} pipeline exited {pipeline}, expected 1"
                    ));
                }
            }
        }
        Ok(())
    });
}
