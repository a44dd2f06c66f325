use rand::Rng;

use crate::image::Image;

/// Minimum per-channel-averaged standard deviation a texture must reach so
/// that photo-consistency across views is informative.
pub const MIN_TEXTURE_STD: f64 = 0.08;

fn random_colour(rng: &mut impl Rng) -> [f64; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn from_colours(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Image<f32> {
    let mut img = Image::filled(3, height, width, 0.0f32);
    for y in 0..height {
        for x in 0..width {
            let c = f(y, x);
            for (ch, v) in c.iter().enumerate() {
                img.set(ch, y, x, v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    img
}

fn checker(rng: &mut impl Rng, h: usize, w: usize) -> Image<f32> {
    let cell = rng.gen_range(3..=12) as f64;
    let (a, b) = (random_colour(rng), random_colour(rng));
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (s, c) = angle.sin_cos();
    from_colours(h, w, |y, x| {
        let (u, v) = (x as f64 * c - y as f64 * s, x as f64 * s + y as f64 * c);
        let parity = ((u / cell).floor() + (v / cell).floor()).rem_euclid(2.0);
        if parity < 1.0 {
            a
        } else {
            b
        }
    })
}

/// Multi-octave bilinear value noise.
fn noise(rng: &mut impl Rng, h: usize, w: usize) -> Image<f32> {
    let octaves = 4;
    let base = rng.gen_range(4.0..12.0);
    let grids: Vec<(usize, Vec<f64>)> = (0..octaves)
        .map(|o| {
            let n = ((base * (1 << o) as f64) as usize).max(2) + 2;
            (n, (0..n * n).map(|_| rng.gen::<f64>()).collect())
        })
        .collect();
    let palette = [random_colour(rng), random_colour(rng), random_colour(rng)];
    let size = h.max(w) as f64;
    from_colours(h, w, |y, x| {
        let mut v = 0.0;
        let mut amp = 0.5;
        let mut norm = 0.0;
        for (n, g) in &grids {
            let scale = (*n - 2) as f64 / size;
            let (fx, fy) = (x as f64 * scale, y as f64 * scale);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let at = |i: usize, j: usize| g[j.min(n - 1) * n + i.min(n - 1)];
            let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
            let bot = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
            v += amp * (top * (1.0 - ty) + bot * ty);
            norm += amp;
            amp *= 0.5;
        }
        let t = v / norm;
        if t < 0.5 {
            mix(palette[0], palette[1], t * 2.0)
        } else {
            mix(palette[1], palette[2], (t - 0.5) * 2.0)
        }
    })
}

/// Linear gradient overlaid with sinusoidal stripes.
fn gradient(rng: &mut impl Rng, h: usize, w: usize) -> Image<f32> {
    let (a, b, c) = (random_colour(rng), random_colour(rng), random_colour(rng));
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let period = rng.gen_range(4.0..16.0);
    let (s, co) = angle.sin_cos();
    let size = h.max(w) as f64;
    from_colours(h, w, |y, x| {
        let t = ((x as f64 * co + y as f64 * s) / size + 1.0) / 2.0;
        let stripe = 0.5 + 0.5 * ((x as f64 * s - y as f64 * co) * std::f64::consts::TAU / period).sin();
        mix(mix(a, b, t), c, 0.6 * stripe)
    })
}

pub fn texture_std(img: &Image<f32>) -> f64 {
    let mut total = 0.0;
    for c in 0..img.channels() {
        let p = img.plane(c);
        let n = p.len() as f64;
        let mean = p.iter().map(|&v| v as f64).sum::<f64>() / n;
        total += (p.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
    }
    total / img.channels() as f64
}

/// A random checker, noise or gradient texture with enough contrast.
pub fn random_texture(rng: &mut impl Rng, height: usize, width: usize) -> Image<f32> {
    loop {
        let img = match rng.gen_range(0..3) {
            0 => checker(rng, height, width),
            1 => noise(rng, height, width),
            _ => gradient(rng, height, width),
        };
        if texture_std(&img) >= MIN_TEXTURE_STD {
            return img;
        }
    }
}
