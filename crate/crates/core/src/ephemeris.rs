//! Sun position in the local East-North-Up frame.
//!
//! The position comes from the Astronomical Almanac's low-precision solar
//! coordinates: mean longitude and mean anomaly give the ecliptic longitude,
//! which is rotated into right ascension / declination and then into the
//! horizon frame through the local sidereal time. The declared accuracy is
//! about 0.01° over the second half of the 20th century and degrades slowly
//! outside it, well inside the 0.5° budget over 1950-2100.
//!
//! Atmospheric refraction is not applied.

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use nalgebra::Vector3;
use std::fmt;

use crate::Vec3;

const J2000: f64 = 2_451_545.0;
const UNIX_EPOCH_JD: f64 = 2_440_587.5;
const SECONDS_PER_DAY: f64 = 86_400.0;

/// First and last instants (inclusive, exclusive) accepted by [`solar_direction`].
const VALID_FROM_UNIX: i64 = -631_152_000; // 1950-01-01T00:00:00Z
const VALID_UNTIL_UNIX: i64 = 4_133_980_800; // 2101-01-01T00:00:00Z

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EphemerisError {
    #[error("latitude {0}° outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0}° outside [-180, 180]")]
    Longitude(f64),
    #[error("timestamp {0} outside the supported window 1950-01-01 .. 2101-01-01")]
    OutOfRange(Timestamp),
    #[error("solar angles out of range: azimuth {azimuth_deg}°, elevation {elevation_deg}°")]
    Angles { azimuth_deg: f64, elevation_deg: f64 },
}

/// Observer position on the WGS84-ish sphere (only latitude/longitude matter).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawGeoLocation", into = "RawGeoLocation")]
pub struct GeoLocation {
    latitude_deg: f64,
    longitude_deg: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeoLocation {
    latitude_deg: f64,
    longitude_deg: f64,
}

impl TryFrom<RawGeoLocation> for GeoLocation {
    type Error = EphemerisError;
    fn try_from(raw: RawGeoLocation) -> Result<Self, Self::Error> {
        GeoLocation::new(raw.latitude_deg, raw.longitude_deg)
    }
}

impl From<GeoLocation> for RawGeoLocation {
    fn from(loc: GeoLocation) -> Self {
        RawGeoLocation {
            latitude_deg: loc.latitude_deg,
            longitude_deg: loc.longitude_deg,
        }
    }
}

impl GeoLocation {
    pub fn new(latitude_deg: f64, longitude_deg: f64) -> Result<Self, EphemerisError> {
        if !(-90.0..=90.0).contains(&latitude_deg) {
            return Err(EphemerisError::Latitude(latitude_deg));
        }
        if !(-180.0..=180.0).contains(&longitude_deg) {
            return Err(EphemerisError::Longitude(longitude_deg));
        }
        Ok(Self {
            latitude_deg,
            longitude_deg,
        })
    }

    /// Melbourne, Australia.
    pub fn melbourne() -> Self {
        Self {
            latitude_deg: -37.81,
            longitude_deg: 144.96,
        }
    }

    pub fn latitude_deg(&self) -> f64 {
        self.latitude_deg
    }

    pub fn longitude_deg(&self) -> f64 {
        self.longitude_deg
    }
}

/// A UTC instant with one-second resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    unix_seconds: i64,
}

impl Timestamp {
    pub fn from_unix(unix_seconds: i64) -> Self {
        Self { unix_seconds }
    }

    /// Midnight UTC at the start of `date`.
    pub fn from_date(date: NaiveDate) -> Self {
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight exists");
        Self::from_unix(Utc.from_utc_datetime(&midnight).timestamp())
    }

    pub fn from_ymd_hms(year: i32, month: u32, day: u32, h: u32, m: u32, s: u32) -> Option<Self> {
        let dt = Utc.with_ymd_and_hms(year, month, day, h, m, s).single()?;
        Some(Self::from_unix(dt.timestamp()))
    }

    pub fn unix_seconds(&self) -> i64 {
        self.unix_seconds
    }

    /// Real-valued Julian day (UT).
    pub fn julian_day(&self) -> f64 {
        self.unix_seconds as f64 / SECONDS_PER_DAY + UNIX_EPOCH_JD
    }

    pub fn plus_seconds(&self, seconds: i64) -> Self {
        Self::from_unix(self.unix_seconds + seconds)
    }

    pub fn to_datetime(&self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.unix_seconds, 0).expect("timestamp within chrono range")
    }

    pub fn date(&self) -> NaiveDate {
        self.to_datetime().date_naive()
    }

    pub fn in_valid_window(&self) -> bool {
        (VALID_FROM_UNIX..VALID_UNTIL_UNIX).contains(&self.unix_seconds)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

/// Sun direction: azimuth clockwise from true north, elevation above the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarAngles {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl SolarAngles {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self, EphemerisError> {
        if !(0.0..360.0).contains(&azimuth_deg) || !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(EphemerisError::Angles {
                azimuth_deg,
                elevation_deg,
            });
        }
        Ok(Self {
            azimuth_deg,
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    /// Inverse of [`sun_unit_vector`]. The vector need not be normalized.
    pub fn from_vector(v: &Vec3) -> Self {
        let horizontal = v.x.hypot(v.y);
        let elevation_deg = v.z.atan2(horizontal).to_degrees();
        let azimuth_deg = if horizontal == 0.0 {
            0.0
        } else {
            wrap_degrees(v.x.atan2(v.y).to_degrees())
        };
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let w = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Equatorial coordinates of the sun plus the quantities needed for transit.
#[derive(Debug, Clone, Copy)]
struct EquatorialSun {
    right_ascension_deg: f64,
    declination_deg: f64,
    mean_longitude_deg: f64,
    /// Greenwich mean sidereal time.
    gmst_deg: f64,
}

fn equatorial_sun(jd: f64) -> EquatorialSun {
    let n = jd - J2000;
    let mean_longitude = wrap_degrees(280.460 + 0.985_647_4 * n);
    let mean_anomaly = wrap_degrees(357.528 + 0.985_600_3 * n).to_radians();
    let ecliptic_longitude = (mean_longitude
        + 1.915 * mean_anomaly.sin()
        + 0.020 * (2.0 * mean_anomaly).sin())
    .to_radians();
    let obliquity = (23.439 - 0.000_000_4 * n).to_radians();

    let right_ascension = (obliquity.cos() * ecliptic_longitude.sin())
        .atan2(ecliptic_longitude.cos())
        .to_degrees();
    let declination = (obliquity.sin() * ecliptic_longitude.sin()).asin().to_degrees();
    let gmst = wrap_degrees(15.0 * (18.697_374_558 + 24.065_709_824_419_08 * n));

    EquatorialSun {
        right_ascension_deg: wrap_degrees(right_ascension),
        declination_deg: declination,
        mean_longitude_deg: mean_longitude,
        gmst_deg: gmst,
    }
}

/// Equation of time in minutes (apparent minus mean solar time).
pub fn equation_of_time_minutes(t: Timestamp) -> f64 {
    let sun = equatorial_sun(t.julian_day());
    let diff = (sun.mean_longitude_deg - sun.right_ascension_deg + 540.0).rem_euclid(360.0) - 180.0;
    4.0 * diff
}

/// Solar declination in degrees.
pub fn declination_deg(t: Timestamp) -> f64 {
    equatorial_sun(t.julian_day()).declination_deg
}

/// Sun azimuth/elevation at `t` seen from `loc`.
pub fn solar_direction(t: Timestamp, loc: GeoLocation) -> Result<SolarAngles, EphemerisError> {
    if !t.in_valid_window() {
        return Err(EphemerisError::OutOfRange(t));
    }
    Ok(horizon_angles(t.julian_day(), loc))
}

fn horizon_angles(jd: f64, loc: GeoLocation) -> SolarAngles {
    let sun = equatorial_sun(jd);
    let hour_angle = (sun.gmst_deg + loc.longitude_deg - sun.right_ascension_deg).to_radians();
    let dec = sun.declination_deg.to_radians();
    let lat = loc.latitude_deg.to_radians();

    let sin_el = (lat.sin() * dec.sin() + lat.cos() * dec.cos() * hour_angle.cos()).clamp(-1.0, 1.0);
    let elevation_deg = sin_el.asin().to_degrees();
    let azimuth_deg = wrap_degrees(
        (-hour_angle.sin() * dec.cos())
            .atan2(dec.sin() * lat.cos() - dec.cos() * lat.sin() * hour_angle.cos())
            .to_degrees(),
    );
    SolarAngles {
        azimuth_deg,
        elevation_deg,
    }
}

/// Unit vector towards the sun in East-North-Up coordinates.
pub fn sun_unit_vector(a: SolarAngles) -> Vec3 {
    let (az, el) = (a.azimuth_deg.to_radians(), a.elevation_deg.to_radians());
    Vector3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin())
}

/// Outcome of a sunrise/sunset search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Daylight {
    Window { sunrise: Timestamp, sunset: Timestamp },
    /// Polar night: the sun never clears the horizon.
    NoDaylight,
    /// Midnight sun: the sun never sets.
    NoNight,
}

impl Daylight {
    pub fn window(&self) -> Option<(Timestamp, Timestamp)> {
        match *self {
            Daylight::Window { sunrise, sunset } => Some((sunrise, sunset)),
            _ => None,
        }
    }
}

/// Instant of upper culmination nearest to local noon on `date`.
pub fn solar_transit(date: NaiveDate, loc: GeoLocation) -> Result<Timestamp, EphemerisError> {
    let midnight = Timestamp::from_date(date);
    // mean local noon, then two fixed-point corrections for the equation of time
    let mut t = midnight.plus_seconds((43_200.0 - loc.longitude_deg * 240.0).round() as i64);
    let mean_noon = t;
    for _ in 0..2 {
        if !t.in_valid_window() {
            return Err(EphemerisError::OutOfRange(t));
        }
        let eot = equation_of_time_minutes(t);
        t = mean_noon.plus_seconds((-eot * 60.0).round() as i64);
    }
    Ok(t)
}

/// Sunrise and sunset bracketing the solar transit of `date`.
///
/// Both instants are found by bisection on the sign of the elevation to a
/// one-second tolerance.
pub fn daylight_window(date: NaiveDate, loc: GeoLocation) -> Result<Daylight, EphemerisError> {
    let transit = solar_transit(date, loc)?;
    let elevation = |t: Timestamp| solar_direction(t, loc).map(|a| a.elevation_deg);

    if elevation(transit)? < 0.0 {
        return Ok(Daylight::NoDaylight);
    }
    let before = transit.plus_seconds(-43_200);
    let after = transit.plus_seconds(43_200);
    if elevation(before)? >= 0.0 && elevation(after)? >= 0.0 {
        return Ok(Daylight::NoNight);
    }
    // near the polar circles one culmination may sit above the horizon; the
    // window is then clipped to the half-day search interval on that side
    let sunrise = if elevation(before)? >= 0.0 {
        before
    } else {
        bisect_horizon(before, transit, &elevation)?
    };
    let sunset = if elevation(after)? >= 0.0 {
        after
    } else {
        bisect_horizon(after, transit, &elevation)?
    };
    Ok(Daylight::Window { sunrise, sunset })
}

/// `below` has negative elevation, `above` nonnegative; returns the first
/// second (towards `above`) with elevation >= 0.
fn bisect_horizon(
    mut below: Timestamp,
    mut above: Timestamp,
    elevation: &impl Fn(Timestamp) -> Result<f64, EphemerisError>,
) -> Result<Timestamp, EphemerisError> {
    while (above.unix_seconds - below.unix_seconds).abs() > 1 {
        let mid = Timestamp::from_unix(below.unix_seconds + (above.unix_seconds - below.unix_seconds) / 2);
        if elevation(mid)? >= 0.0 {
            above = mid;
        } else {
            below = mid;
        }
    }
    Ok(above)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn location_range_is_enforced() {
        assert!(GeoLocation::new(91.0, 0.0).is_err());
        assert!(GeoLocation::new(0.0, -180.5).is_err());
        assert!(GeoLocation::new(-90.0, 180.0).is_ok());
    }

    #[test]
    fn equinox_noon_at_equator_is_near_zenith() {
        let loc = GeoLocation::new(0.0, 0.0).unwrap();
        let noon = solar_transit(date(2024, 3, 20), loc).unwrap();
        let a = solar_direction(noon, loc).unwrap();
        assert!((a.elevation_deg() - 90.0).abs() < 1.0, "{a:?}");
    }

    #[test]
    fn pole_elevation_equals_declination_at_solstice() {
        let loc = GeoLocation::new(90.0, 0.0).unwrap();
        let t = Timestamp::from_ymd_hms(2024, 6, 21, 12, 0, 0).unwrap();
        let a = solar_direction(t, loc).unwrap();
        assert!((a.elevation_deg() - 23.44).abs() < 0.5, "{a:?}");
    }

    #[test]
    fn out_of_window_is_rejected() {
        let loc = GeoLocation::melbourne();
        let t = Timestamp::from_ymd_hms(1949, 12, 31, 23, 59, 59).unwrap();
        assert!(matches!(solar_direction(t, loc), Err(EphemerisError::OutOfRange(_))));
        let t = Timestamp::from_ymd_hms(2101, 1, 1, 0, 0, 0).unwrap();
        assert!(solar_direction(t, loc).is_err());
        let t = Timestamp::from_ymd_hms(2100, 12, 31, 23, 0, 0).unwrap();
        assert!(solar_direction(t, loc).is_ok());
    }

    #[test]
    fn unit_vector_examples() {
        let v = sun_unit_vector(SolarAngles::new(0.0, 0.0).unwrap());
        assert!((v - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        let v = sun_unit_vector(SolarAngles::new(123.0, 90.0).unwrap());
        assert!((v - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = sun_unit_vector(SolarAngles::new(90.0, 45.0).unwrap());
        assert!((v - Vector3::new(h, 0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn polar_day_and_night() {
        let pole = GeoLocation::new(90.0, 0.0).unwrap();
        assert_eq!(daylight_window(date(2024, 12, 21), pole).unwrap(), Daylight::NoDaylight);
        assert_eq!(daylight_window(date(2024, 6, 21), pole).unwrap(), Daylight::NoNight);
    }

    #[test]
    fn window_brackets_zero_elevation() {
        let loc = GeoLocation::melbourne();
        let (rise, set) = daylight_window(date(2024, 1, 15), loc).unwrap().window().unwrap();
        let el = |t: Timestamp| solar_direction(t, loc).unwrap().elevation_deg();
        assert!(el(rise) >= 0.0 && el(rise.plus_seconds(-1)) < 0.0);
        assert!(el(set) >= 0.0 && el(set.plus_seconds(1)) < 0.0);
        let hours = (set.unix_seconds() - rise.unix_seconds()) as f64 / 3600.0;
        assert!((14.0..15.0).contains(&hours), "{hours}");
    }

    #[test]
    fn julian_day_of_j2000() {
        let t = Timestamp::from_ymd_hms(2000, 1, 1, 12, 0, 0).unwrap();
        assert_eq!(t.julian_day(), J2000);
    }

    fn arb_location() -> impl Strategy<Value = GeoLocation> {
        (-90.0..=90.0f64, -180.0..=180.0f64).prop_map(|(a, b)| GeoLocation::new(a, b).unwrap())
    }

    fn arb_time() -> impl Strategy<Value = Timestamp> {
        (VALID_FROM_UNIX..VALID_UNTIL_UNIX).prop_map(Timestamp::from_unix)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn angles_stay_in_range(t in arb_time(), loc in arb_location()) {
            let a = solar_direction(t, loc).unwrap();
            prop_assert!((0.0..360.0).contains(&a.azimuth_deg()));
            prop_assert!((-90.0..=90.0).contains(&a.elevation_deg()));
            prop_assert!((sun_unit_vector(a).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn julian_day_is_monotone(a in arb_time(), b in arb_time()) {
            prop_assert_eq!(a < b, a.julian_day() < b.julian_day());
        }

        #[test]
        fn antipodal_elevation_flips(t in arb_time(), lat in -90.0..=90.0f64, lon in -180.0..=0.0f64) {
            let here = solar_direction(t, GeoLocation::new(lat, lon).unwrap()).unwrap();
            let there = solar_direction(t, GeoLocation::new(-lat, lon + 180.0).unwrap()).unwrap();
            prop_assert!((here.elevation_deg() + there.elevation_deg()).abs() < 1.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn transit_is_a_daily_maximum(day in 0i64..50_000, lat in -59.9..59.9f64, lon in -180.0..=180.0f64) {
            let loc = GeoLocation::new(lat, lon).unwrap();
            let d = date(1955, 1, 1) + chrono::Duration::days(day);
            let noon = solar_transit(d, loc).unwrap();
            let el = |t: Timestamp| solar_direction(t, loc).unwrap().elevation_deg();
            prop_assert!(el(noon) >= el(noon.plus_seconds(7200)));
            prop_assert!(el(noon) >= el(noon.plus_seconds(-7200)));
        }

        #[test]
        fn angles_roundtrip_through_vector(az in 0.0..360.0f64, el in -88.9..=90.0f64) {
            let a = SolarAngles::new(az, el).unwrap();
            let back = SolarAngles::from_vector(&sun_unit_vector(a));
            prop_assert!((back.elevation_deg() - el).abs() < 1e-9);
            if el < 89.999 {
                let daz = (back.azimuth_deg() - az + 540.0).rem_euclid(360.0) - 180.0;
                prop_assert!(daz.abs() < 1e-9);
            }
        }
    }
}
