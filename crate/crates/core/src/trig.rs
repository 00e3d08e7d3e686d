//! Inlined `sin_cos` for the feature-map hot loops.
//!
//! Arguments up to `FAST_LIMIT` in magnitude are reduced by `pi / 2` with a
//! three-part Cody-Waite split and evaluated with the classic minimax kernels
//! on `[-pi/4, pi/4]`; the error stays within a few ulp of the correctly
//! rounded result. Larger arguments fall back to `f64::sin_cos`.

// The kernel coefficients are kept digit for digit as published.
#![allow(clippy::excessive_precision)]

/// Above this the quotient no longer fits the exact-product range of the split.
const FAST_LIMIT: f64 = 524_288.0;

const INV_PIO2: f64 = std::f64::consts::FRAC_2_PI;
// pi / 2 split into 33-bit pieces, so `q * PIO2_1` and `q * PIO2_2` are exact
// for |q| < 2^20.
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_506_192_249_32e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;
/// `1.5 * 2^52`: adding and subtracting it rounds to the nearest integer and
/// leaves that integer in the low mantissa bits.
const ROUNDER: f64 = 6_755_399_441_055_744.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

const SIGN: u64 = 1 << 63;

/// `(sin x, cos x)`.
#[inline]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    if !(x.abs() <= FAST_LIMIT) {
        return x.sin_cos();
    }
    let shifted = x * INV_PIO2 + ROUNDER;
    let q = shifted - ROUNDER;
    let quadrant = shifted.to_bits();
    let r = ((x - q * PIO2_1) - q * PIO2_2) - q * PIO2_3;

    let z = r * r;
    let s = r + z * r * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let poly = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let c = w + (((1.0 - w) - hz) + z * poly);

    // quadrant n: (sin, cos) = (s, c), (c, -s), (-s, -c), (-c, s)
    let (sin, cos) = if quadrant & 1 == 0 { (s, c) } else { (c, s) };
    let sin_sign = (quadrant & 2) << 62;
    let cos_sign = ((quadrant.wrapping_add(1)) & 2) << 62;
    (
        f64::from_bits(sin.to_bits() ^ (sin_sign & SIGN)),
        f64::from_bits(cos.to_bits() ^ (cos_sign & SIGN)),
    )
}
