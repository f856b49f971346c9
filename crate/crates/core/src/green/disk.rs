//! Unit disk: `R(x, y) = (1/4π) log(|x|²|y|² - 2x·y + 1)`.

use super::Jet;
use crate::{Mat2, Vec2, FOUR_PI};

fn q(x: Vec2, y: Vec2) -> f64 {
    x.norm_squared() * y.norm_squared() - 2.0 * x.dot(&y) + 1.0
}

pub(super) fn value(x: Vec2, y: Vec2) -> f64 {
    q(x, y).ln() / FOUR_PI
}

/// `G = (1/2π) log(|y| |x - y/|y|²| / |x - y|)`, written without the
/// reflection so that `y = 0` needs no special case.
pub(super) fn green(x: Vec2, y: Vec2) -> f64 {
    (q(x, y) / (x - y).norm_squared()).ln() / FOUR_PI
}

pub(super) fn jet(x: Vec2, y: Vec2) -> Jet {
    let q = q(x, y);
    let qx = x * (2.0 * y.norm_squared()) - y * 2.0;
    let qy = y * (2.0 * x.norm_squared()) - x * 2.0;
    let qxx = Mat2::identity() * (2.0 * y.norm_squared());
    let qxy = x * y.transpose() * 4.0 - Mat2::identity() * 2.0;
    Jet {
        v: q.ln() / FOUR_PI,
        g: qx / (q * FOUR_PI),
        h: (qxx / q - qx * qx.transpose() / (q * q)) / FOUR_PI,
        m: (qxy / q - qx * qy.transpose() / (q * q)) / FOUR_PI,
    }
}
