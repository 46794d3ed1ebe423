//! Dev tool: fit the reduction multipliers relating raw diagonal kappa-jet
//! combinations to the displayed c_jk polynomials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webcurv::expr::parse;
use webcurv::jets::{Jet, JetContext};
use webcurv::models::{rho_sigma, RaySpaceModel};
use webcurv::webgeom::{real_mat_inv, Seed};

// build jet for rho_k(s) as 1-var jet of order `ord` from the derivative tower
fn tower_jet(tower: &[f64], k: usize, ord: usize) -> Jet {
    let ctx = JetContext::new(1, ord).unwrap();
    let mut j = Jet::constant(ctx, 0.0);
    // crude: constant + add seeds; easiest is to sum variable powers — instead use from coeffs
    // Jet has no raw constructor; emulate: j = sum_m tower[k+m]/m! * s^m where s = variable - value0... 
    // variable(ctx,0,0.0) gives jet "x" with value 0; powers give monomials.
    let x = Jet::variable(ctx, 0, 0.0).unwrap();
    let mut fact = 1.0;
    for m in 0..=ord {
        if m > 0 { fact *= m as f64; }
        let mono = x.powi(m as i32).unwrap();
        j = j.add(&mono.scale(tower[k + m] / fact));
    }
    j
}

struct RS { r: Vec<Jet>, s: Vec<Jet> }

fn c00p(v: &RS, n: f64) -> Jet {
    let t = v.r[1].mul(&v.r[1]).sub(&v.s[1].mul(&v.s[1])).add_scalar(4.0).scale(1.0 + n);
    t.add(&v.r[0].mul(&v.r[2]).scale(4.0))
}
fn i1p(v: &RS, n: f64) -> Jet {
    let a = v.r[0].mul(&v.r[0]).mul(&v.r[3]).scale(4.0);
    let inner = v.r[1].mul(&v.r[1]).sub(&v.s[1].mul(&v.s[1])).add_scalar(4.0);
    let b2 = v.r[1].mul(&inner).scale(3.0 + n);
    let c = v.r[0].mul(&v.s[1]).mul(&v.s[2]).scale(4.0);
    a.sub(&b2.add(&c).scale(0.5 * (1.0 + n)))
}
fn i2p(v: &RS, n: f64) -> Jet {
    let t1 = v.s[1].scale((1.0 + n) * 4.0 * (n - 11.0))
        .add(&v.r[1].mul(&v.r[1]).mul(&v.s[1]).scale((1.0 + n) * (n - 3.0)));
    let t2 = v.s[1].powi(3).unwrap().scale((n - 3.0) * (n + 1.0));
    let t3 = v.r[0].mul(&v.r[1].mul(&v.s[2]).scale(n + 7.0).add(&v.r[0].mul(&v.s[3]).scale(2.0))).scale(4.0);
    t1.sub(&t2).add(&t3).scale(0.5)
}
fn i3p(v: &RS, n: f64) -> Jet {
    let r1sq = v.r[1].mul(&v.r[1]);
    let s1sq = v.s[1].mul(&v.s[1]);
    let a = r1sq.mul(&s1sq.scale(-(11.0 * n + 3.0)).add_scalar(2.0 * n * (n + 20.0) + 6.0)).scale(2.0 * (n + 1.0));
    let b = v.r[0].mul(&v.r[1]).mul(&v.s[1]).mul(&v.s[2]).scale(8.0 * (n + 1.0) * (n + 6.0));
    let c = r1sq.mul(&r1sq).scale((n + 1.0) * (n * (n + 14.0) + 9.0));
    let d = s1sq.scale(4.0 * ((n - 22.0) * n + 49.0)).add_scalar(96.0 * (n - 1.0))
        .sub(&s1sq.mul(&s1sq).scale((n - 8.0) * n + 3.0)).scale(n + 1.0);
    let e = v.r[0].mul(&v.r[0]).mul(&v.r[0].mul(&v.r[4]).add(&v.s[2].mul(&v.s[2]).scale(3.0))).scale(16.0);
    a.add(&b).add(&c).add(&d).add(&e).scale(0.5)
}
fn i4p(v: &RS, n: f64) -> Jet {
    let r1sq = v.r[1].mul(&v.r[1]);
    let s1sq = v.s[1].mul(&v.s[1]);
    let a = r1sq.mul(&r1sq).sub(&s1sq.scale(8.0)).add(&s1sq.mul(&s1sq))
        .sub(&r1sq.mul(&s1sq.add_scalar(-4.0)).scale(2.0)).add_scalar(16.0)
        .scale((n + 1.0) * (n - 3.0) * (n - 5.0) / 8.0);
    let b = s1sq.scale(24.0 * (n + 1.0)).add(&v.r[0].mul(&v.r[0]).mul(&v.s[2]).mul(&v.s[2]).scale(n + 7.0)).scale(2.0);
    a.sub(&b)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1); // 1..=4
    for n in [2usize, 3, 4, 5] {
        let nf = n as f64;
        let m_dim = n - 1;
        let vars: Vec<String> = (1..=m_dim).map(|i| format!("s{i}")).collect();
        let var_refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(42 + n as u64);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let nsamp = 200;
        for _ in 0..nsamp {
            // random univariate degree-6 f, g with separation
            let fc: Vec<f64> = (0..=6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut gc: Vec<f64> = (0..=6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            gc[0] = fc[0] - rng.gen_range(2.0..4.0);
            let poly = |c: &[f64]| -> String {
                c.iter().enumerate().map(|(k, v)| format!("({v})*s1^{k}")).collect::<Vec<_>>().join(" + ")
            };
            let f = parse(&poly(&fc), &var_refs).unwrap();
            let g = parse(&poly(&gc), &var_refs).unwrap();
            let m = RaySpaceModel::graphs(n, f, g, vec![]);
            let s0 = vec![0.0; m_dim];
            // raw diagonal jets of log|h| in (s1, t1)
            let mut coords = s0.clone(); coords.extend_from_slice(&s0);
            let mut seeds = vec![Seed::Frozen; 2 * m_dim];
            seeds[0] = Seed::Var(0); seeds[m_dim] = Seed::Var(1);
            let h = m.volume_coeff_mapped(&coords, &seeds, 2, 4).unwrap();
            let lh = h.abs_log().unwrap();
            let ct = |j: usize, k: usize| lh.partial(&[(j + 1) as u8, (k + 1) as u8]).unwrap();
            let (rt, st) = rho_sigma(&m, 0, &s0, 6).unwrap();
            let r0 = rt[0];
            let raw = match which {
                1 => r0.powi(3) * (ct(1, 0) + ct(0, 1)),
                2 => r0.powi(3) * (ct(1, 0) - ct(0, 1)),
                3 => r0.powi(4) * (ct(2, 0) + ct(0, 2)),
                4 => r0.powi(4) * ct(1, 1),
                _ => unreachable!(),
            };
            let ord = 2;
            let rs = RS {
                r: (0..=4).map(|k| tower_jet(&rt, k, ord)).collect(),
                s: (0..=4).map(|k| tower_jet(&st, k, ord)).collect(),
            };
            let c00 = c00p(&rs, nf);
            let i1 = i1p(&rs, nf);
            let i2 = i2p(&rs, nf);
            let i3 = i3p(&rs, nf);
            let i4 = i4p(&rs, nf);
            let d = |j: &Jet, k: usize| j.partial(&[k as u8]).unwrap();
            let (r1, s1) = (rt[1], st[1]);
            let feats: Vec<f64> = match which {
                1 => vec![d(&i1,0), d(&c00,0)*r1, d(&c00,0)*s1, d(&c00,1)],
                2 => vec![d(&i2,0), d(&c00,0)*r1, d(&c00,0)*s1, d(&c00,1)],
                3 | 4 => {
                    let disp = if which == 3 { d(&i3,0) } else { d(&i4,0) };
                    let c = d(&c00,0); let dc = d(&c00,1); let d2c = d(&c00,2);
                    vec![
                        disp,
                        c, c*r1*r1, c*s1*s1, c*r1*s1, c*c,
                        dc*r1, dc*s1, d2c,
                        d(&i1,0)*r1, d(&i1,0)*s1, d(&i2,0)*r1, d(&i2,0)*s1,
                        d(&i1,1), d(&i2,1),
                        c*rt[0]*st[2],
                    ]
                }
                _ => unreachable!(),
            };
            rows.push(feats);
            ys.push(raw);
        }
        // least squares with small ridge
        let p = rows[0].len();
        let mut ata = vec![vec![0.0; p]; p];
        let mut aty = vec![0.0; p];
        for (row, &y) in rows.iter().zip(ys.iter()) {
            for i in 0..p {
                for j in 0..p { ata[i][j] += row[i] * row[j]; }
                aty[i] += row[i] * y;
            }
        }
        for i in 0..p { ata[i][i] += 1e-9; }
        let inv = real_mat_inv(&ata).unwrap();
        let sol: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv[i][j] * aty[j]).sum()).collect();
        let mut worst = 0.0f64;
        for (row, &y) in rows.iter().zip(ys.iter()) {
            let pred: f64 = row.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
            let scale = y.abs().max(1.0);
            worst = worst.max((pred - y).abs() / scale);
        }
        println!("identity {which} n={n}: worst rel resid {worst:.3e}");
        for (i, c) in sol.iter().enumerate() {
            if c.abs() > 1e-6 { println!("   coef[{i}] = {c:+.12}"); }
        }
    }
}
