mod support;

use proptest::prelude::*;
use suntrack::ephemeris::{self, GeoLocation, Timestamp};
use support::{enu, meeus, separation_deg};

#[test]
fn oracle_reproduces_meeus_example_25a() {
    // 1992 October 13.0 TD
    let jd = meeus::julian_day(1992, 10, 13.0);
    assert_eq!(jd, 2_448_908.5);
    let (alpha, delta, _, _) = meeus::equatorial(jd);
    assert!((alpha - 198.38083).abs() < 2e-4, "{alpha}");
    assert!((delta - -7.78507).abs() < 2e-4, "{delta}");
}

#[test]
fn oracle_reproduces_meeus_example_12a() {
    // 1987 April 10, 0h UT: apparent sidereal time 13h10m46.1351s
    let theta = meeus::apparent_sidereal_deg(meeus::julian_day(1987, 4, 10.0));
    let expected = (13.0 + 10.0 / 60.0 + 46.1351 / 3600.0) * 15.0;
    assert!((theta - expected).abs() < 1e-4, "{theta} vs {expected}");
}

#[test]
fn oracle_matches_the_spa_reference_point() {
    // 2003-10-17 12:30:30 local (UTC-7), Golden, Colorado; the published
    // topocentric values without refraction: azimuth 194.34024, elevation 39.872046
    let t = Timestamp::from_ymd_hms(2003, 10, 17, 19, 30, 30).unwrap();
    let (az, el) = meeus::horizontal(meeus::jd_from_unix(t.unix_seconds()), 39.742476, -105.1786);
    assert!((az - 194.34024).abs() < 0.01, "{az}");
    assert!((el - 39.872046).abs() < 0.01, "{el}");
}

#[test]
fn library_agrees_with_oracle_at_the_reference_point() {
    let t = Timestamp::from_ymd_hms(2003, 10, 17, 19, 30, 30).unwrap();
    let loc = GeoLocation::new(39.742476, -105.1786).unwrap();
    let a = ephemeris::solar_direction(t, loc).unwrap();
    let (az, el) = meeus::horizontal(meeus::jd_from_unix(t.unix_seconds()), 39.742476, -105.1786);
    assert!(separation_deg(enu(a.azimuth_deg(), a.elevation_deg()), enu(az, el)) < 0.05);
}

#[test]
fn julian_days_agree() {
    let t = Timestamp::from_ymd_hms(2024, 1, 15, 6, 0, 0).unwrap();
    assert!((t.julian_day() - meeus::julian_day(2024, 1, 15.25)).abs() < 1e-9);
}

const FROM: i64 = -631_152_000; // 1950-01-01
const UNTIL: i64 = 4_133_980_800; // 2101-01-01

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn library_within_half_degree_of_oracle(
        unix in FROM..UNTIL,
        lat in -90.0..=90.0f64,
        lon in -180.0..=180.0f64,
    ) {
        let t = Timestamp::from_unix(unix);
        let a = ephemeris::solar_direction(t, GeoLocation::new(lat, lon).unwrap()).unwrap();
        let (az, el) = meeus::horizontal(meeus::jd_from_unix(unix), lat, lon);
        let sep = separation_deg(enu(a.azimuth_deg(), a.elevation_deg()), enu(az, el));
        prop_assert!(sep <= 0.5, "separation {sep} at {t} lat {lat} lon {lon}");
        prop_assert!((a.elevation_deg() - el).abs() <= 0.5);
    }
}
