//! Paired t-test at the 95% confidence level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which alternative hypothesis the test checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    TwoSided,
    /// mean(a − b) > 0
    Greater,
    /// mean(a − b) < 0
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub mean_difference: f64,
    pub t: f64,
    pub df: usize,
    pub critical_value: f64,
    pub significant_at_95: bool,
}

/// Student-t quantile t(0.975, df) for df = 1..=200.
const T_975: [f64; 200] = [
    12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912, 2.364624, 2.306004, 2.262157,
    2.228139, 2.200985, 2.178813, 2.160369, 2.144787, 2.131450, 2.119905, 2.109816, 2.100922,
    2.093024, 2.085963, 2.079614, 2.073873, 2.068658, 2.063899, 2.059539, 2.055529, 2.051831,
    2.048407, 2.045230, 2.042272, 2.039513, 2.036933, 2.034515, 2.032245, 2.030108, 2.028094,
    2.026192, 2.024394, 2.022691, 2.021075, 2.019541, 2.018082, 2.016692, 2.015368, 2.014103,
    2.012896, 2.011741, 2.010635, 2.009575, 2.008559, 2.007584, 2.006647, 2.005746, 2.004879,
    2.004045, 2.003241, 2.002465, 2.001717, 2.000995, 2.000298, 1.999624, 1.998972, 1.998341,
    1.997730, 1.997138, 1.996564, 1.996008, 1.995469, 1.994945, 1.994437, 1.993943, 1.993464,
    1.992997, 1.992543, 1.992102, 1.991673, 1.991254, 1.990847, 1.990450, 1.990063, 1.989686,
    1.989319, 1.988960, 1.988610, 1.988268, 1.987934, 1.987608, 1.987290, 1.986979, 1.986675,
    1.986377, 1.986086, 1.985802, 1.985523, 1.985251, 1.984984, 1.984723, 1.984467, 1.984217,
    1.983972, 1.983731, 1.983495, 1.983264, 1.983038, 1.982815, 1.982597, 1.982383, 1.982173,
    1.981967, 1.981765, 1.981567, 1.981372, 1.981180, 1.980992, 1.980808, 1.980626, 1.980448,
    1.980272, 1.980100, 1.979930, 1.979764, 1.979600, 1.979439, 1.979280, 1.979124, 1.978971,
    1.978820, 1.978671, 1.978524, 1.978380, 1.978239, 1.978099, 1.977961, 1.977826, 1.977692,
    1.977561, 1.977431, 1.977304, 1.977178, 1.977054, 1.976931, 1.976811, 1.976692, 1.976575,
    1.976460, 1.976346, 1.976233, 1.976122, 1.976013, 1.975905, 1.975799, 1.975694, 1.975590,
    1.975488, 1.975387, 1.975288, 1.975189, 1.975092, 1.974996, 1.974902, 1.974808, 1.974716,
    1.974625, 1.974535, 1.974446, 1.974358, 1.974271, 1.974185, 1.974100, 1.974017, 1.973934,
    1.973852, 1.973771, 1.973691, 1.973612, 1.973534, 1.973457, 1.973381, 1.973305, 1.973231,
    1.973157, 1.973084, 1.973012, 1.972941, 1.972870, 1.972800, 1.972731, 1.972663, 1.972595,
    1.972528, 1.972462, 1.972396, 1.972332, 1.972268, 1.972204, 1.972141, 1.972079, 1.972017,
    1.971957, 1.971896,
];

/// Student-t quantile t(0.95, df) for df = 1..=200.
const T_95: [f64; 200] = [
    6.313752, 2.919986, 2.353363, 2.131847, 2.015048, 1.943180, 1.894579, 1.859548, 1.833113,
    1.812461, 1.795885, 1.782288, 1.770933, 1.761310, 1.753050, 1.745884, 1.739607, 1.734064,
    1.729133, 1.724718, 1.720743, 1.717144, 1.713872, 1.710882, 1.708141, 1.705618, 1.703288,
    1.701131, 1.699127, 1.697261, 1.695519, 1.693889, 1.692360, 1.690924, 1.689572, 1.688298,
    1.687094, 1.685954, 1.684875, 1.683851, 1.682878, 1.681952, 1.681071, 1.680230, 1.679427,
    1.678660, 1.677927, 1.677224, 1.676551, 1.675905, 1.675285, 1.674689, 1.674116, 1.673565,
    1.673034, 1.672522, 1.672029, 1.671553, 1.671093, 1.670649, 1.670219, 1.669804, 1.669402,
    1.669013, 1.668636, 1.668271, 1.667916, 1.667572, 1.667239, 1.666914, 1.666600, 1.666294,
    1.665996, 1.665707, 1.665425, 1.665151, 1.664885, 1.664625, 1.664371, 1.664125, 1.663884,
    1.663649, 1.663420, 1.663197, 1.662978, 1.662765, 1.662557, 1.662354, 1.662155, 1.661961,
    1.661771, 1.661585, 1.661404, 1.661226, 1.661052, 1.660881, 1.660715, 1.660551, 1.660391,
    1.660234, 1.660081, 1.659930, 1.659782, 1.659637, 1.659495, 1.659356, 1.659219, 1.659085,
    1.658953, 1.658824, 1.658697, 1.658573, 1.658450, 1.658330, 1.658212, 1.658096, 1.657982,
    1.657870, 1.657759, 1.657651, 1.657544, 1.657439, 1.657336, 1.657235, 1.657135, 1.657037,
    1.656940, 1.656845, 1.656752, 1.656659, 1.656569, 1.656479, 1.656391, 1.656305, 1.656219,
    1.656135, 1.656052, 1.655970, 1.655890, 1.655811, 1.655732, 1.655655, 1.655579, 1.655504,
    1.655430, 1.655357, 1.655285, 1.655215, 1.655145, 1.655076, 1.655007, 1.654940, 1.654874,
    1.654808, 1.654744, 1.654680, 1.654617, 1.654555, 1.654494, 1.654433, 1.654373, 1.654314,
    1.654256, 1.654198, 1.654141, 1.654085, 1.654029, 1.653974, 1.653920, 1.653866, 1.653813,
    1.653761, 1.653709, 1.653658, 1.653607, 1.653557, 1.653508, 1.653459, 1.653411, 1.653363,
    1.653316, 1.653269, 1.653223, 1.653177, 1.653132, 1.653087, 1.653043, 1.652999, 1.652956,
    1.652913, 1.652871, 1.652829, 1.652787, 1.652746, 1.652705, 1.652665, 1.652625, 1.652586,
    1.652547, 1.652508,
];

const Z_975: f64 = 1.959964;
const Z_95: f64 = 1.644854;

/// Critical value at α = 0.05. Beyond df = 200 the normal quantile is used.
pub fn critical_value(df: usize, tail: Tail) -> f64 {
    assert!(df >= 1, "degrees of freedom must be >= 1");
    let (table, z) = match tail {
        Tail::TwoSided => (&T_975, Z_975),
        Tail::Greater | Tail::Less => (&T_95, Z_95),
    };
    table.get(df - 1).copied().unwrap_or(z)
}

/// Paired t-test on `d = a − b` with `df = n − 1`.
///
/// When every difference is identical the statistic is degenerate: a zero
/// difference gives `t = 0` (not significant), a nonzero one gives
/// `t = ±∞` (significant in the direction of the mean).
pub fn paired_t_test(a: &[f64], b: &[f64], tail: Tail) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "paired t-test needs at least 2 pairs, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = if sd == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(mean)
        }
    } else {
        mean / (sd / (n as f64).sqrt())
    };
    let df = n - 1;
    let crit = critical_value(df, tail);
    let significant = match tail {
        Tail::TwoSided => t.abs() > crit,
        Tail::Greater => t > crit,
        Tail::Less => t < -crit,
    };
    Ok(SignificanceResult {
        mean_difference: mean,
        t,
        df,
        critical_value: crit,
        significant_at_95: significant,
    })
}
