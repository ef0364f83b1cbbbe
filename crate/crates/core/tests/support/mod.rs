//! Shared helpers for the integration tests.

#![allow(dead_code)]

/// Solar position after Meeus, *Astronomical Algorithms* ch. 12, 22 and 25:
/// apparent longitude with the T² series, nutation in longitude and
/// obliquity, apparent sidereal time. Written apart from the library code
/// and used only as a reference.
pub mod meeus {
    fn rad(d: f64) -> f64 {
        d.to_radians()
    }

    fn norm360(d: f64) -> f64 {
        d.rem_euclid(360.0)
    }

    /// Julian day from a Gregorian calendar date (Meeus 7.1).
    pub fn julian_day(year: i32, month: u32, day: f64) -> f64 {
        let (mut y, mut m) = (year as f64, month as f64);
        if m <= 2.0 {
            y -= 1.0;
            m += 12.0;
        }
        let a = (y / 100.0).floor();
        let b = 2.0 - a + (a / 4.0).floor();
        (365.25 * (y + 4716.0)).floor() + (30.6001 * (m + 1.0)).floor() + day + b - 1524.5
    }

    /// Apparent right ascension and declination in degrees, plus the
    /// nutation in longitude (deg) and true obliquity (deg).
    pub fn equatorial(jd: f64) -> (f64, f64, f64, f64) {
        let t = (jd - 2_451_545.0) / 36_525.0;
        let l0 = norm360(280.46646 + 36_000.76983 * t + 0.000_303_2 * t * t);
        let m = norm360(357.52911 + 35_999.05029 * t - 0.000_153_7 * t * t);
        let c = (1.914_602 - 0.004_817 * t - 0.000_014 * t * t) * rad(m).sin()
            + (0.019_993 - 0.000_101 * t) * rad(2.0 * m).sin()
            + 0.000_289 * rad(3.0 * m).sin();
        let true_long = l0 + c;
        let omega = 125.04 - 1934.136 * t;
        let lambda = true_long - 0.005_69 - 0.004_78 * rad(omega).sin();

        // nutation in longitude, low-accuracy series of ch. 22, arcseconds
        let l_sun = 280.4665 + 36_000.7698 * t;
        let l_moon = 218.3165 + 481_267.8813 * t;
        let dpsi = -17.20 * rad(omega).sin() - 1.32 * rad(2.0 * l_sun).sin() - 0.23 * rad(2.0 * l_moon).sin()
            + 0.21 * rad(2.0 * omega).sin();

        let eps0 = 23.0 + 26.0 / 60.0 + 21.448 / 3600.0 - (46.8150 * t + 0.000_59 * t * t - 0.001_813 * t * t * t) / 3600.0;
        let eps = eps0 + 0.002_56 * rad(omega).cos();

        let alpha = norm360(
            (rad(eps).cos() * rad(lambda).sin())
                .atan2(rad(lambda).cos())
                .to_degrees(),
        );
        let delta = (rad(eps).sin() * rad(lambda).sin()).asin().to_degrees();
        (alpha, delta, dpsi / 3600.0, eps)
    }

    /// Apparent sidereal time at Greenwich in degrees (Meeus 12.4 plus the
    /// equation of the equinoxes).
    pub fn apparent_sidereal_deg(jd: f64) -> f64 {
        let t = (jd - 2_451_545.0) / 36_525.0;
        let mean = 280.460_618_37 + 360.985_647_366_29 * (jd - 2_451_545.0) + 0.000_387_933 * t * t
            - t * t * t / 38_710_000.0;
        let (_, _, dpsi, eps) = equatorial(jd);
        norm360(mean + dpsi * rad(eps).cos())
    }

    /// Azimuth (clockwise from north) and geometric elevation, degrees.
    pub fn horizontal(jd: f64, lat_deg: f64, lon_deg: f64) -> (f64, f64) {
        let (alpha, delta, _, _) = equatorial(jd);
        let h = rad(apparent_sidereal_deg(jd) + lon_deg - alpha);
        let (phi, d) = (rad(lat_deg), rad(delta));
        let el = (phi.sin() * d.sin() + phi.cos() * d.cos() * h.cos()).asin();
        // Meeus measures azimuth from the south; shift to north-based.
        let az_south = h.sin().atan2(h.cos() * phi.sin() - d.tan() * phi.cos());
        (norm360(az_south.to_degrees() + 180.0), el.to_degrees())
    }

    /// Julian day of a Unix timestamp.
    pub fn jd_from_unix(unix_seconds: i64) -> f64 {
        unix_seconds as f64 / 86_400.0 + 2_440_587.5
    }
}

/// East-north-up unit vector of an azimuth/elevation pair in degrees.
pub fn enu(az_deg: f64, el_deg: f64) -> [f64; 3] {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    [el.cos() * az.sin(), el.cos() * az.cos(), el.sin()]
}

/// Great-circle angle between two directions, degrees.
pub fn separation_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let n = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    n.atan2(dot).to_degrees()
}

/// Relative difference with an absolute floor for values near zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
