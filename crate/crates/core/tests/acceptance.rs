//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use loopforms::complexes::{shear, BigradedComplex, Slot};
use loopforms::derham::{
    central_character, character_equivalent, curvature, derham_cohomology, flat_descend, is_zero_matrix,
    ConnectionModule, FlatDescent, Forms,
};
use loopforms::hochschild::{self, bar_complex, hkr_map, verify_b_is_de_rham, Backend};
use loopforms::linalg::{self, rat, Rational, SparseMatrix};
use loopforms::presentations::{parse_algebra, parse_expr_in, GCAlgebra};
use loopforms::rees::{
    ext_over_exterior, koszul_dual_dmodule, localize_t, parse_rees, parse_weyl, random_rees, symbol, Letter,
    weyl_normal_form, WeylElement,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn alg(src: &str) -> GCAlgebra {
    parse_algebra(src).expect("corpus algebras parse")
}

fn line() -> GCAlgebra {
    alg("algebra A { gens: x:(0,0); }")
}

fn plane() -> GCAlgebra {
    alg("algebra P { gens: x:(0,0), y:(0,0); }")
}

fn binom(n: i64, k: i64) -> usize {
    if k < 0 || n < k {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as usize
}

/// Number of forms `x^α dx_S` with `|S| = p` and `|α| + p = w` in `k` variables.
fn forms_count(k: i64, p: i64, w: i64) -> usize {
    let a = w - p;
    if a < 0 {
        return 0;
    }
    binom(k, p) * binom(a + k - 1, k - 1)
}

fn hkr_agreement() -> Outcome {
    let start = Instant::now();
    for (k, a) in [(1, line()), (2, plane())] {
        let bar = hochschild::hh(&a, (-3, 0), 4, Backend::Bar).map_err(|e| e.to_string())?;
        for w in 0..=4 {
            for d in -3..=0 {
                let expected = forms_count(k, -d as i64, w as i64);
                let got = bar.get(&(d, w)).copied().unwrap_or(0);
                ensure(got == expected, format!("HH at ({d},{w}) of {k} variables: {got} != {expected}"))?;
            }
        }
        let bc = bar_complex(&a, 4, -3).map_err(|e| e.to_string())?;
        for n in 0..=3 {
            let f = hkr_map(&a, &bc, n).map_err(|e| e.to_string())?;
            for w in 0..=4 {
                let s: Slot = (-(n as i32), w);
                let src = f.source().homology_dim(s.0, s.1).map_err(|e| e.to_string())?;
                let tgt = f.target().homology_dim(s.0, s.1).map_err(|e| e.to_string())?;
                let rank = f.induced_rank(s).map_err(|e| e.to_string())?;
                ensure(src == tgt && rank == src, format!("HKR not bijective at {s:?}"))?;
            }
        }
    }
    let t = hochschild::hh(&plane(), (-3, 0), 4, Backend::Bar).map_err(|e| e.to_string())?;
    ensure(t[&(0, 2)] == 3 && t[&(-1, 2)] == 4 && t[&(-2, 2)] == 1, "Q[x,y] weight 2 dims")?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("Q[x], Q[x,y] to weight 4, degrees >= -3 in {:.1?}", elapsed))
}

fn rotation_is_de_rham() -> Outcome {
    let start = Instant::now();
    let a = plane();
    for n in 0..=2 {
        let c = verify_b_is_de_rham(&a, n, 3).map_err(|e| e.to_string())?;
        ensure(c.verified, format!("identity fails for n = {n}"))?;
        ensure(c.scalar == rat(n as i64 + 1), format!("scalar {} for n = {n}", c.scalar))?;
    }
    ensure(start.elapsed() < Duration::from_secs(60), "too slow")?;
    Ok("scalars 1, 2, 3 for n = 0, 1, 2".into())
}

fn mixed_identities() -> Outcome {
    let corpus = [
        "algebra Q { gens: ; }",
        "algebra A { gens: x:(0,0); }",
        "algebra P { gens: x:(0,0), y:(0,0); }",
        "algebra D { gens: x:(0,0); rels: x^2; }",
        "algebra N { gens: x:(0,0), y:(0,0); rels: x*y; }",
        "algebra L { gens: l:(-1,-1); }",
        "algebra E { gens: e:(1,0); }",
        "algebra M { gens: x:(0,0), e:(1,0); }",
        "algebra U { gens: u:(2,1), l:(-1,-1); }",
    ];
    let mut checked = 0;
    for src in corpus {
        let a = alg(src);
        let bc = bar_complex(&a, 4, -4).map_err(|e| e.to_string())?;
        for (name, slot, residue) in bc.mixed().identity_residues() {
            ensure(residue.is_zero(), format!("{name} nonzero at {slot:?} in `{}`", a.name()))?;
            checked += 1;
        }
    }
    Ok(format!("{} algebras, {checked} exact zero matrices", corpus.len()))
}

fn cyclic_homology_of_point() -> Outcome {
    let t = hochschild::hc(&alg("algebra Q { gens: ; }"), (-6, 0), 0).map_err(|e| e.to_string())?;
    let dims: Vec<usize> = (-6..=0).rev().map(|d| t.get(&(d, 0)).copied().unwrap_or(0)).collect();
    ensure(dims == [1, 0, 1, 0, 1, 0, 1], format!("hc dims {dims:?}"))?;
    let e = ext_over_exterior(8);
    let ext: Vec<usize> = e.dims.values().copied().collect();
    ensure(ext == [1, 0, 1, 0, 1, 0, 1, 0, 1], format!("ext dims {ext:?}"))?;
    ensure(e.resolution_exact && e.u_injective, "resolution")?;
    Ok("hc = 1,0,1,0,1,0,1; Ext = 1,0,1,0,1,0,1,0,1".into())
}

fn periodic_is_de_rham() -> Outcome {
    let a = line();
    let hp = hochschild::hp(&a, (-4, 0), 4).map_err(|e| e.to_string())?;
    let mut dr: BTreeMap<usize, BTreeMap<u32, usize>> = BTreeMap::new();
    for p in 0..=1 {
        dr.insert(p, derham_cohomology(&a, p, 4, 0).map_err(|e| e.to_string())?);
    }
    for w in 0..=4u32 {
        for j in -4..=0i32 {
            let expected: usize = dr.iter().filter(|(p, _)| (**p as i32 - j).rem_euclid(2) == 0).map(|(_, m)| m[&w]).sum();
            let got = hp.get(&(j, w as i32)).copied().unwrap_or(0);
            ensure(got == expected, format!("HP at ({j},{w}): {got} != {expected}"))?;
        }
        let rank: usize = dr.values().map(|m| m[&w]).sum();
        ensure(rank == usize::from(w == 0), format!("de Rham rank {rank} at weight {w}"))?;
    }
    Ok("weight 0 rank 1, weights 1..4 rank 0".into())
}

fn module(base: &GCAlgebra, entries: &[&[&str]]) -> ConnectionModule {
    let forms = Forms::new(base, 0).expect("smooth base");
    let gamma = entries
        .iter()
        .map(|row| row.iter().map(|s| parse_expr_in(forms.algebra(), s).expect("entry parses")).collect())
        .collect();
    ConnectionModule::new("E", base, gamma).expect("valid connection")
}

fn curvature_formula() -> Outcome {
    let p = plane();
    let m = module(&p, &[&["x*dy"]]);
    let dxdy = parse_expr_in(m.forms().algebra(), "dx*dy").unwrap();
    ensure(curvature(&m) == vec![vec![dxdy.clone()]], "R(x dy) != dx^dy")?;
    for deg in 0..=2 {
        for w in 0..=4 {
            let sq = m.delta_squared_blocks((deg, w));
            // multiplication by dx∧dy, computed directly on the slot basis
            let by_form = m.blocks((deg, w), |s| s.iter().map(|e| m.forms().wedge(&dxdy, e)).collect());
            let by_form: BTreeMap<_, _> = by_form.into_iter().filter(|(_, b)| !b.is_zero()).collect();
            ensure(sq == by_form, format!("δ² != dx^dy at ({deg},{w})"))?;
        }
    }
    let exact = module(&p, &[&["x*dy + y*dx"]]);
    for deg in 0..=2 {
        for w in 0..=4 {
            ensure(exact.delta_squared_blocks((deg, w)).is_empty(), "δ² != 0 for d(xy)")?;
        }
    }
    let l = line();
    let corpus = vec![
        module(&l, &[&["0"]]),
        module(&l, &[&["3/2*dx"]]),
        module(&l, &[&["x^2*dx"]]),
        module(&l, &[&["0", "dx"], &["0", "0"]]),
        module(&p, &[&["x*dy"]]),
        module(&p, &[&["x*dy + y*dx"]]),
        module(&p, &[&["y*dx"]]),
        module(&p, &[&["dx", "0"], &["0", "dy"]]),
        module(&p, &[&["0", "dx"], &["dy", "0"]]),
        module(&p, &[&["0", "x*dy"], &["0", "0"]]),
    ];
    let mut flats = 0;
    for (i, m) in corpus.iter().enumerate() {
        let zero = is_zero_matrix(&curvature(m));
        let squares_to_zero = (0..=2).all(|d| (0..=3).all(|w| m.delta_squared_blocks((d, w)).is_empty()));
        let descends = matches!(flat_descend(m), FlatDescent::Flat(_));
        ensure(descends == zero && zero == squares_to_zero, format!("corpus entry {i}"))?;
        flats += usize::from(descends);
    }
    Ok(format!("δ² = R on all slots; {flats} of {} corpus connections flat", corpus.len()))
}

fn central_characters() -> Outcome {
    let p = plane();
    let l = line();
    let rank_one = [(p.clone(), "x*dy"), (p.clone(), "x*dy + y*dx"), (p.clone(), "y^2*dx + x*y*dy"), (l, "x*dx")];
    for (base, g) in &rank_one {
        let m = module(base, &[&[g]]);
        let c = central_character(&m).map_err(|e| e.to_string())?;
        ensure(c.closed && m.forms().d(&c.omega).is_zero(), format!("character of {g} not closed"))?;
    }
    let f = Forms::new(&p, 0).unwrap();
    let w1 = parse_expr_in(f.algebra(), "dx*dy").unwrap();
    let w2 = w1.add(&f.d(&parse_expr_in(f.algebra(), "x^2*dy").unwrap()));
    let e = character_equivalent(&f, &w1, &w2, 4).map_err(|e| e.to_string())?;
    let alpha = e.alpha.ok_or("no witness")?;
    ensure(e.equivalent && f.d(&alpha) == w2.sub(&w1), "witness does not integrate")?;
    Ok(format!("{} rank-1 characters closed; alpha = {}", rank_one.len(), f.format(&alpha)))
}

fn rees_family() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..50 {
        let n = rng.gen_range(1..=2);
        let a = random_rees(&mut rng, n, 3);
        let b = random_rees(&mut rng, n, 3);
        ensure(symbol(&a.mul(&b)) == symbol(&a).mul(&symbol(&b)), format!("symbol, pair {k}"))?;
        ensure(localize_t(&a.mul(&b)) == localize_t(&a).mul(&localize_t(&b)), format!("localize, pair {k}"))?;
    }
    let tx = parse_rees(1, "T*x").unwrap();
    ensure(symbol(&tx).to_string() == "x*xi", "symbol((t∂)x)")?;
    ensure(localize_t(&tx) == weyl_normal_form(1, &[Letter::D(0), Letter::X(0)]), "localize((t∂)x)")?;
    let by_hand = WeylElement::x(1, 0).mul(&WeylElement::d(1, 0)).add(&WeylElement::one(1));
    ensure(localize_t(&tx) == by_hand && parse_weyl(1, "d*x").unwrap() == by_hand, "∂x")?;
    Ok("50 seeded pairs; symbol((t∂)x) = x*xi".into())
}

fn koszul_dictionary() -> Outcome {
    let l = line();
    let examples = [module(&l, &[&["0"]]), module(&l, &[&["5/2*dx"]]), module(&l, &[&["0", "dx"], &["0", "0"]])];
    for (i, m) in examples.iter().enumerate() {
        let dm = koszul_dual_dmodule(m, 5).map_err(|e| e.to_string())?;
        // [∂, x] = 1 on every basis section of weight ≤ 5
        let comm = dm.d[0].mul(&dm.x[0]).sub(&dm.x[0].mul(&dm.d[0]));
        for (col, (_, alpha)) in dm.basis().iter().enumerate() {
            if alpha[0] > 5 {
                continue;
            }
            let v = comm.column(col);
            let ok = v.iter().enumerate().all(|(r, c)| if r == col { c.is_one() } else { c.is_zero() });
            ensure(ok, format!("example {i}: [∂,x] != 1 on column {col}"))?;
        }
        ensure(dm.weyl_relations_hold(), format!("example {i}: relations"))?;
        let back = dm.to_connection().map_err(|e| e.to_string())?;
        ensure(back.gamma() == m.gamma(), format!("example {i}: round trip"))?;
    }
    Ok("three flat connections, weight <= 5".into())
}

fn random_complex(rng: &mut ChaCha8Rng) -> BigradedComplex {
    let mut bases = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for w in 0..rng.gen_range(1..=4) {
        let d0 = rng.gen_range(-3..=2);
        let k = rng.gen_range(1..=3);
        let rows: Vec<Vec<Rational>> = (0..3).map(|_| (0..k).map(|_| rat(rng.gen_range(-2..=2))).collect()).collect();
        let a = SparseMatrix::from_dense(3, k, &rows);
        let ker = linalg::kernel_basis(&a.transpose());
        let b = match ker.first() {
            Some(v) => SparseMatrix::from_columns(3, std::slice::from_ref(v)).transpose(),
            None => SparseMatrix::zeros(1, 3),
        };
        let labels = |n: usize, p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        bases.insert((d0, w), labels(k, "a"));
        bases.insert((d0 + 1, w), labels(3, "b"));
        bases.insert((d0 + 2, w), labels(1, "c"));
        diffs.insert((d0, w), a);
        diffs.insert((d0 + 1, w), b);
    }
    BigradedComplex::new(bases, diffs).expect("d² = 0 by construction")
}

/// Homology dimension from ranks of the raw differentials.
fn raw_homology(c: &BigradedComplex, s: Slot) -> usize {
    let out = linalg::rank(&c.differential(s));
    let inc = linalg::rank(&c.differential((s.0 - 1, s.1)));
    c.dim(s) - out - inc
}

fn shear_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..20 {
        let c = random_complex(&mut rng);
        for n in [-2, 2] {
            let s = shear(&c, n);
            for slot in c.slots().collect::<Vec<_>>() {
                let moved = (slot.0 - n * slot.1, slot.1);
                let got = s.homology_dim(moved.0, moved.1).map_err(|e| e.to_string())?;
                ensure(got == raw_homology(&c, slot), format!("complex {i}, n = {n}, slot {slot:?}"))?;
            }
        }
    }
    Ok("20 seeded complexes, n = -2 and 2".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("HKR agreement", hkr_agreement),
        ("rotation is the de Rham differential", rotation_is_de_rham),
        ("mixed identities", mixed_identities),
        ("cyclic homology of the point", cyclic_homology_of_point),
        ("periodic homology is 2-periodic de Rham", periodic_is_de_rham),
        ("curvature formula", curvature_formula),
        ("central character", central_characters),
        ("Rees family", rees_family),
        ("Koszul dictionary", koszul_dictionary),
        ("shear invariance", shear_invariance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
