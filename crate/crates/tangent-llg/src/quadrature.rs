//! Fixed quadrature rules on the reference tetrahedron
//! `{(x,y,z) : x,y,z >= 0, x+y+z <= 1}`.
//!
//! Both rules are Stroud conical products with positive weights; the weights
//! sum to the reference volume 1/6, so an integral over a physical cell `T`
//! with volume `V` is `6 V * sum_q w_q f(F(xi_q))` where `F` maps the
//! reference tetrahedron onto `T`.
//!
//! The degree-3 rule is the rule used for every state-dependent coefficient
//! in the schemes (cross term, cut-off weighted mass); the degree-5 rule
//! serves as the fallback for the exact L1 constraint integration.

#![allow(clippy::excessive_precision)]

use crate::mesh::{Mesh, Point3};

#[derive(Debug, Clone, Copy)]
pub struct TetRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

impl TetRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates (phi_0..phi_3) of the q-th point.
    pub fn barycentric(&self, q: usize) -> [f64; 4] {
        let [x, y, z] = self.points[q];
        [1.0 - x - y - z, x, y, z]
    }

    /// Physical position of the q-th point inside cell `c`.
    pub fn map_to_cell(&self, mesh: &Mesh, c: usize, q: usize) -> Point3 {
        let bc = self.barycentric(q);
        let cell = mesh.cell(c);
        let mut p = [0.0; 3];
        for (i, &v) in cell.iter().enumerate() {
            let vert = mesh.vertex(v);
            for d in 0..3 {
                p[d] += bc[i] * vert[d];
            }
        }
        p
    }
}

// 8-point conical product rule, exact for total degree <= 3.
const DEG3_POINTS: [[f64; 3]; 8] = [
    [
        0.12251482265544136,
        0.13605497680284601,
        0.15668263733681828,
    ],
    [
        0.12251482265544136,
        0.13605497680284601,
        0.58474756320489429,
    ],
    [0.12251482265544136, 0.565933165072801, 0.065838687060044393],
    [0.12251482265544136, 0.565933165072801, 0.2457133252117133],
    [
        0.54415184401122518,
        0.070679724159396912,
        0.081395667014670256,
    ],
    [
        0.54415184401122518,
        0.070679724159396912,
        0.30377276481470766,
    ],
    [
        0.54415184401122518,
        0.29399880063162298,
        0.034202793236766407,
    ],
    [
        0.54415184401122518,
        0.29399880063162298,
        0.12764656212038544,
    ],
];
const DEG3_WEIGHTS: [f64; 8] = [
    0.036979856358852904,
    0.036979856358852918,
    0.021157006454524049,
    0.021157006454524056,
    0.016027040598476618,
    0.016027040598476625,
    0.009169429921479743,
    0.0091694299214797464,
];

pub const DEGREE3: TetRule = TetRule {
    points: &DEG3_POINTS,
    weights: &DEG3_WEIGHTS,
};

// 27-point conical product rule, exact for total degree <= 5.
const DEG5_POINTS: [[f64; 3]; 27] = [
    [
        0.072994024073149727,
        0.082121567863442449,
        0.095219879841714941,
    ],
    [
        0.072994024073149727,
        0.082121567863442449,
        0.42244220403170407,
    ],
    [
        0.072994024073149727,
        0.082121567863442449,
        0.74966452822169294,
    ],
    [
        0.072994024073149727,
        0.37957823028059046,
        0.061696018609146516,
    ],
    [
        0.072994024073149727,
        0.37957823028059046,
        0.27371387282312998,
    ],
    [
        0.072994024073149727,
        0.37957823028059046,
        0.48573172703711331,
    ],
    [
        0.072994024073149727,
        0.73016502804763206,
        0.022184302640819688,
    ],
    [
        0.072994024073149727,
        0.73016502804763206,
        0.098420473939609163,
    ],
    [
        0.072994024073149727,
        0.73016502804763206,
        0.17465664523839861,
    ],
    [
        0.34700376603835204,
        0.05784760393614264,
        0.067074241752058519,
    ],
    [
        0.34700376603835204,
        0.05784760393614264,
        0.29757431501275272,
    ],
    [
        0.34700376603835204,
        0.05784760393614264,
        0.52807438827344677,
    ],
    [
        0.34700376603835204,
        0.26738032041188431,
        0.043459555653802474,
    ],
    [
        0.34700376603835204,
        0.26738032041188431,
        0.19280795677488188,
    ],
    [
        0.34700376603835204,
        0.26738032041188431,
        0.34215635789596116,
    ],
    [
        0.34700376603835204,
        0.51433866217409208,
        0.015626939257901616,
    ],
    [
        0.34700376603835204,
        0.51433866217409208,
        0.069328785893777972,
    ],
    [
        0.34700376603835204,
        0.51433866217409208,
        0.12303063252965429,
    ],
    [
        0.70500220988849827,
        0.026133252286734861,
        0.030301481174275818,
    ],
    [
        0.70500220988849827,
        0.026133252286734861,
        0.13443226891238347,
    ],
    [
        0.70500220988849827,
        0.026133252286734861,
        0.23856305665049105,
    ],
    [
        0.70500220988849827,
        0.12079182013390254,
        0.019633302935484504,
    ],
    [
        0.70500220988849827,
        0.12079182013390254,
        0.087102984988799606,
    ],
    [
        0.70500220988849827,
        0.12079182013390254,
        0.15457266704211467,
    ],
    [
        0.70500220988849827,
        0.23235780057986491,
        0.0070596311395547786,
    ],
    [
        0.70500220988849827,
        0.23235780057986491,
        0.031319994765818419,
    ],
    [
        0.70500220988849827,
        0.23235780057986491,
        0.055580358392082051,
    ],
];
const DEG5_WEIGHTS: [f64; 27] = [
    0.0087704749296510631,
    0.014032759887441709,
    0.0087704749296510578,
    0.010006142572176123,
    0.016009828115481808,
    0.010006142572176118,
    0.0030478770905181867,
    0.0048766033448291021,
    0.003047877090518185,
    0.0081626507665466773,
    0.01306024122647469,
    0.0081626507665466721,
    0.0093126823794704473,
    0.014900291807152726,
    0.0093126823794704421,
    0.0028366486956309159,
    0.0045386379130094683,
    0.0028366486956309142,
    0.0016716811314837049,
    0.0026746898103739295,
    0.0016716811314837039,
    0.0019072034149817865,
    0.0030515254639708602,
    0.0019072034149817854,
    0.00058093531583738465,
    0.00092949650533981603,
    0.00058093531583738433,
];

pub const DEGREE5: TetRule = TetRule {
    points: &DEG5_POINTS,
    weights: &DEG5_WEIGHTS,
};

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    // exact moment over the reference tetrahedron: a! b! c! / (a+b+c+3)!
    fn check_rule(rule: TetRule, degree: u32) {
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                for c in 0..=(degree - a - b) {
                    let exact =
                        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(rule.weights)
                        .map(|(p, w)| {
                            w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                        })
                        .sum();
                    assert!(
                        (approx - exact).abs() < 1e-15,
                        "monomial x^{a} y^{b} z^{c}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn degree3_integrates_cubics_exactly() {
        check_rule(DEGREE3, 3);
        assert!(DEGREE3.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn degree5_integrates_quintics_exactly() {
        check_rule(DEGREE5, 5);
        assert!(DEGREE5.weights.iter().all(|&w| w > 0.0));
    }
}
