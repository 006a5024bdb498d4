//! Univariate and bivariate normal distribution functions.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - cdf(x)`.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Upper orthant probability `P(X > h, Y > k)` of a standard bivariate
/// normal with correlation `r` (Genz's algorithm, double precision).
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { sf(k) };
    }
    if k == f64::NEG_INFINITY {
        return sf(h);
    }
    if r == 0.0 {
        return sf(h) * sf(k);
    }
    const W6: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
    const X6: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970];
    const W12: [f64; 6] = [
        0.04717533638651177,
        0.1069393259953183,
        0.1600783285433464,
        0.2031674267230659,
        0.2334925365383547,
        0.2491470458134029,
    ];
    const X12: [f64; 6] = [
        0.9815606342467191,
        0.9041172563704750,
        0.7699026741943050,
        0.5873179542866171,
        0.3678314989981802,
        0.1252334085114692,
    ];
    const W20: [f64; 10] = [
        0.01761400713915212,
        0.04060142980038694,
        0.06267204833410906,
        0.08327674157670475,
        0.1019301198172404,
        0.1181945319615184,
        0.1316886384491766,
        0.1420961093183821,
        0.1491729864726037,
        0.1527533871307259,
    ];
    const X20: [f64; 10] = [
        0.9931285991850949,
        0.9639719272779138,
        0.9122344282513259,
        0.8391169718222188,
        0.7463319064601508,
        0.6360536807265150,
        0.5108670019508271,
        0.3737060887154196,
        0.2277858511416451,
        0.07652652113349733,
    ];
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&W6, &X6)
    } else if r.abs() < 0.75 {
        (&W12, &X12)
    } else {
        (&W20, &X20)
    };
    // nodes on (0, 2) mirrored about 1
    let nodes: Vec<(f64, f64)> = w
        .iter()
        .zip(x)
        .flat_map(|(&wi, &xi)| [(wi, 1.0 - xi), (wi, 1.0 + xi)])
        .collect();

    let tp = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        bvn = nodes
            .iter()
            .map(|&(wi, xi)| {
                let sn = (asr * xi).sin();
                wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp()
            })
            .sum::<f64>();
        bvn = bvn * asr / tp + sf(h) * sf(k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        bvn = 0.0;
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = as_.sqrt();
            let bs = (h - k).powi(2);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * sf(b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut acc = 0.0;
            for &(wi, xi) in &nodes {
                let xs = (a * xi).powi(2);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-(hk / 2.0) * xs / (1.0 + rs).powi(2)).exp() / rs;
                    acc += wi * asr.exp() * (sp - ep);
                }
            }
            bvn = (a * acc - bvn) / tp;
        }
        if r > 0.0 {
            bvn += sf(h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 { cdf(k) - cdf(h) } else { sf(h) - sf(k) };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X1 > 0, X2 > 0)` for a bivariate normal with the given mean and covariance.
pub fn bvn_positive_quadrant(mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let s1 = cov[0][0].sqrt();
    let s2 = cov[1][1].sqrt();
    if s1 == 0.0 || s2 == 0.0 {
        let p1 = if s1 == 0.0 { (mean[0] > 0.0) as u8 as f64 } else { sf(-mean[0] / s1) };
        let p2 = if s2 == 0.0 { (mean[1] > 0.0) as u8 as f64 } else { sf(-mean[1] / s2) };
        return p1 * p2;
    }
    let rho = (cov[0][1] / (s1 * s2)).clamp(-1.0, 1.0);
    bvn_upper(-mean[0] / s1, -mean[1] / s2, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: P(X>h, Y>k) = ∫_h^∞ φ(x) Φc((k - r x)/√(1-r²)) dx
    /// by composite Simpson on a wide grid.
    fn bvn_by_quadrature(h: f64, k: f64, r: f64) -> f64 {
        let s = (1.0 - r * r).sqrt();
        let lo = h.max(-12.0);
        let hi = 12.0;
        if lo >= hi {
            return 0.0;
        }
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let f = |x: f64| pdf(x) * sf((k - r * x) / s);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + i as f64 * step;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * step / 3.0
    }

    #[test]
    fn arcsine_formula_at_origin() {
        for &r in &[-0.95, -0.5, -0.1, 0.2, 0.5, 0.8, 0.97] {
            let want = 0.25 + (r as f64).asin() / (2.0 * PI);
            assert!((bvn_upper(0.0, 0.0, r) - want).abs() < 1e-14, "r={r}");
        }
    }

    #[test]
    fn agrees_with_quadrature() {
        for &(h, k, r) in &[
            (0.3, -0.7, 0.1),
            (1.2, 0.4, 0.6),
            (-1.0, 2.0, -0.4),
            (0.5, 0.5, 0.95),
            (-0.5, 1.5, -0.96),
            (2.0, -2.0, 0.8),
        ] {
            let got = bvn_upper(h, k, r);
            let want = bvn_by_quadrature(h, k, r);
            assert!((got - want).abs() < 1e-9, "h={h} k={k} r={r}: {got} vs {want}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-5, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-12 * p.max(1e-3) * 1e3);
        }
    }
}
