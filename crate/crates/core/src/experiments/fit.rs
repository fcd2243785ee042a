//! Log–log slope fits.

/// Least-squares slope of `ln y` against `ln x` over points with positive,
/// finite coordinates. `None` with fewer than two usable points or no spread
/// in `x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Error-growth slope against elapsed time `s = t - t0` over
/// `[from·s_end, s_end]`, skipping samples whose absolute time lies in
/// `exclude`. `from = 0.1` is the final decade.
pub fn growth_slope(
    t0: f64,
    times: &[f64],
    errors: &[f64],
    from: f64,
    exclude: &[Window],
) -> Option<f64> {
    let t_end = times.last()? - t0;
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(errors)
        .filter(|(t, _)| {
            let s = **t - t0;
            s >= from * t_end && !exclude.iter().any(|w| w.contains(**t))
        })
        .map(|(t, e)| (t - t0, *e))
        .unzip();
    loglog_slope(&xs, &ys)
}

/// `log₂(e_{i-1}/e_i)` for successive halvings; `None` where undefined.
pub fn successive_orders(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let r = (w[0] / w[1]).log2();
            r.is_finite().then_some(r)
        })
        .collect()
}
