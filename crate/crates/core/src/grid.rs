/// `count` distinct integers spaced evenly in log scale over `[lo, hi]`,
/// including both ends (every integer in range if there are fewer than
/// `count`). Rounded collisions at the low end are pushed up by one.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let lo = lo.max(1);
    if hi < lo {
        return Vec::new();
    }
    if count <= 1 || hi == lo {
        return vec![hi];
    }
    if count > hi - lo {
        return (lo..=hi).collect();
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for k in 0..count {
        let x = a + (b - a) * k as f64 / (count - 1) as f64;
        let floor = out.last().map_or(lo, |&p| p + 1);
        let room = hi - (count - 1 - k);
        out.push((x.exp().round() as usize).clamp(floor, room));
    }
    out
}
