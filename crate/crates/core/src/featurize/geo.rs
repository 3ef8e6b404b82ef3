//! Spherical and planar geometry for GPS features.

pub const EARTH_RADIUS_KM: f64 = 6371.0;
const EARTH_RADIUS_M: f64 = EARTH_RADIUS_KM * 1000.0;

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Local equirectangular projection in meters, centred on
/// `(lat0, lon0)`. Longitude differences wrap into `[-180, 180)`.
pub fn project(lat: f64, lon: f64, lat0: f64, lon0: f64) -> (f64, f64) {
    let dlon = (lon - lon0 + 540.0).rem_euclid(360.0) - 180.0;
    let x = EARTH_RADIUS_M * dlon.to_radians() * lat0.to_radians().cos();
    let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
    (x, y)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Polygon area by the shoelace formula (absolute value).
pub fn shoelace_area(polygon: &[(f64, f64)]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let n = polygon.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() / 2.0
}

/// Hull area in square meters of lat/lon points, projected around their mean
/// latitude and first longitude.
pub fn hull_area_m2(coords: &[(f64, f64)]) -> f64 {
    if coords.len() < 3 {
        return 0.0;
    }
    let lat0 = coords.iter().map(|c| c.0).sum::<f64>() / coords.len() as f64;
    let lon0 = coords[0].1;
    let projected: Vec<_> = coords.iter().map(|&(la, lo)| project(la, lo, lat0, lon0)).collect();
    shoelace_area(&convex_hull(&projected))
}

/// Mean and population variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_great_circle() {
        let d = haversine_m(0.0, 0.0, 0.0, 90.0);
        let expected = std::f64::consts::PI * EARTH_RADIUS_KM / 2.0 * 1000.0;
        assert!((d - expected).abs() < 1e-6, "{d} vs {expected}");
        assert!((d / 1000.0 - 10_007.54).abs() < 0.01);
    }

    #[test]
    fn unit_square_with_interior_points() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.2, 0.7)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert_eq!(shoelace_area(&hull), 1.0);
    }

    #[test]
    fn collinear_points_have_no_area() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)];
        assert_eq!(shoelace_area(&convex_hull(&pts)), 0.0);
    }

    #[test]
    fn population_variance_of_two_dwells() {
        let (_, v) = mean_var(&[21_600.0, 10_800.0]);
        assert_eq!(v, 5_400.0f64.powi(2));
    }
}
