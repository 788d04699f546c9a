//! Fiber chainage to map coordinates along a surveyed route.
//!
//! Interpolation inside a segment is linear in latitude and longitude rather
//! than geodesic. For segments of a few kilometres the difference is well
//! under a metre.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const DEFAULT_SLACK: f64 = 1.02;
/// Allowed relative disagreement between a segment's chainage difference and
/// `slack_factor` times its great-circle length.
pub const SEGMENT_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lat.is_finite() && (-90.0..=90.0).contains(&self.lat)) {
            return Err(Error::InvalidArgument(format!(
                "latitude {} outside [-90, 90]",
                self.lat
            )));
        }
        if !(self.lon.is_finite() && (-180.0..=180.0).contains(&self.lon)) {
            return Err(Error::InvalidArgument(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertex {
    pub lat: f64,
    pub lon: f64,
    pub chainage_m: f64,
}

impl Vertex {
    pub fn point(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePolyline {
    pub vertices: Vec<Vertex>,
    pub slack_factor: f64,
}

/// Great-circle distance.
pub fn haversine_m(a: LatLon, b: LatLon) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    // Symmetric in a and b: every term above is even in the differences.
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin())
}

impl RoutePolyline {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.slack_factor.is_finite() && self.slack_factor >= 1.0) {
            return bad(format!("slack_factor {} must be >= 1", self.slack_factor));
        }
        let Some(first) = self.vertices.first() else {
            return bad("route has no vertices".into());
        };
        if first.chainage_m != 0.0 {
            return bad("first vertex chainage must be 0".into());
        }
        for v in &self.vertices {
            v.point().validate()?;
        }
        for (k, w) in self.vertices.windows(2).enumerate() {
            let dc = w[1].chainage_m - w[0].chainage_m;
            if !(dc > 0.0 && dc.is_finite()) {
                return bad(format!(
                    "chainage not strictly increasing at vertex {}",
                    k + 1
                ));
            }
            let expect = self.slack_factor * haversine_m(w[0].point(), w[1].point())?;
            if (dc - expect).abs() > SEGMENT_TOLERANCE * expect {
                return bad(format!(
                    "segment {k}: chainage step {dc:.3} m disagrees with {expect:.3} m of slack-adjusted route"
                ));
            }
        }
        Ok(())
    }

    pub fn length_m(&self) -> f64 {
        self.vertices.last().map_or(0.0, |v| v.chainage_m)
    }
}

/// Chainage accumulates `slack_factor` times each segment's great-circle
/// length, starting at 0.
pub fn build_route(waypoints: &[LatLon], slack_factor: f64) -> Result<RoutePolyline> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidConfig(
            "a route needs at least two waypoints".into(),
        ));
    }
    if !(slack_factor.is_finite() && slack_factor >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "slack_factor {slack_factor} must be >= 1"
        )));
    }
    let mut vertices = Vec::with_capacity(waypoints.len());
    let mut chainage = 0.0;
    for (k, p) in waypoints.iter().enumerate() {
        p.validate()?;
        if k > 0 {
            let d = haversine_m(waypoints[k - 1], *p)?;
            if d == 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "waypoints {} and {k} coincide (zero-length segment)",
                    k - 1
                )));
            }
            chainage += slack_factor * d;
        }
        vertices.push(Vertex {
            lat: p.lat,
            lon: p.lon,
            chainage_m: chainage,
        });
    }
    Ok(RoutePolyline {
        vertices,
        slack_factor,
    })
}

pub fn locate_fault(route: &RoutePolyline, fiber_distance_m: f64) -> Result<LatLon> {
    let Some(last) = route.vertices.last() else {
        return Err(Error::InvalidArgument("route is empty".into()));
    };
    if !(fiber_distance_m.is_finite() && fiber_distance_m >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fiber distance {fiber_distance_m} must be nonnegative"
        )));
    }
    if fiber_distance_m > last.chainage_m {
        return Err(Error::BeyondRouteEnd {
            distance_m: fiber_distance_m,
            route_m: last.chainage_m,
        });
    }
    // First vertex with chainage >= d.
    let k = route
        .vertices
        .partition_point(|v| v.chainage_m < fiber_distance_m);
    let b = route.vertices[k];
    if b.chainage_m == fiber_distance_m || k == 0 {
        return Ok(b.point());
    }
    let a = route.vertices[k - 1];
    let f = (fiber_distance_m - a.chainage_m) / (b.chainage_m - a.chainage_m);
    Ok(LatLon::new(
        a.lat + f * (b.lat - a.lat),
        a.lon + f * (b.lon - a.lon),
    ))
}

/// Route file contents: either raw waypoints to be chained, or vertices that
/// already carry chainage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RouteSpec {
    Waypoints {
        #[serde(default = "default_slack")]
        slack_factor: f64,
        waypoints: Vec<LatLon>,
    },
    Vertices {
        #[serde(default = "default_slack")]
        slack_factor: f64,
        vertices: Vec<Vertex>,
    },
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

impl RouteSpec {
    pub fn into_route(self) -> Result<RoutePolyline> {
        match self {
            RouteSpec::Waypoints {
                slack_factor,
                waypoints,
            } => build_route(&waypoints, slack_factor),
            RouteSpec::Vertices {
                slack_factor,
                vertices,
            } => {
                let r = RoutePolyline {
                    vertices,
                    slack_factor,
                };
                r.validate()?;
                Ok(r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equator_degree() {
        let d = haversine_m(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0)).unwrap();
        // R * pi / 180
        assert!((d - 111_194.926_644_558_7).abs() < 1e-6, "{d}");
        assert_eq!(
            haversine_m(LatLon::new(10.0, 20.0), LatLon::new(10.0, 20.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn invalid_coordinates() {
        assert!(haversine_m(LatLon::new(91.0, 0.0), LatLon::new(0.0, 0.0)).is_err());
        assert!(haversine_m(LatLon::new(0.0, 0.0), LatLon::new(0.0, -180.5)).is_err());
        assert!(haversine_m(LatLon::new(f64::NAN, 0.0), LatLon::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn slack_scales_chainage() {
        let pts = [
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 1.0),
            LatLon::new(0.5, 1.5),
        ];
        let a = build_route(&pts, 1.0).unwrap();
        let b = build_route(&pts, 1.02).unwrap();
        for (u, v) in a.vertices.iter().zip(&b.vertices) {
            assert!((v.chainage_m - 1.02 * u.chainage_m).abs() <= 1e-9 * v.chainage_m.max(1.0));
        }
        assert!((a.vertices[1].chainage_m - 111_194.926_644_558_7).abs() < 1e-6);
    }

    #[test]
    fn degenerate_routes() {
        assert!(build_route(&[LatLon::new(0.0, 0.0)], 1.0).is_err());
        let dup = [LatLon::new(1.0, 1.0), LatLon::new(1.0, 1.0)];
        assert!(build_route(&dup, 1.0).is_err());
        assert!(build_route(&[LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0)], 0.9).is_err());
        let empty = RoutePolyline {
            vertices: vec![],
            slack_factor: 1.0,
        };
        assert!(locate_fault(&empty, 0.0).is_err());
    }

    #[test]
    fn vertices_and_midpoints() {
        let pts = [
            LatLon::new(45.0, 7.0),
            LatLon::new(45.01, 7.02),
            LatLon::new(45.03, 7.02),
        ];
        let r = build_route(&pts, DEFAULT_SLACK).unwrap();
        r.validate().unwrap();
        for v in &r.vertices {
            assert_eq!(locate_fault(&r, v.chainage_m).unwrap(), v.point());
        }
        let (a, b) = (r.vertices[0], r.vertices[1]);
        let m = locate_fault(&r, (a.chainage_m + b.chainage_m) / 2.0).unwrap();
        assert!((m.lat - (a.lat + b.lat) / 2.0).abs() < 1e-12);
        assert!((m.lon - (a.lon + b.lon) / 2.0).abs() < 1e-12);
        match locate_fault(&r, r.length_m() + 1.0) {
            Err(Error::BeyondRouteEnd { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_rules() {
        let mut r = build_route(&[LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.01)], 1.0).unwrap();
        r.validate().unwrap();
        r.vertices[1].chainage_m *= 1.3;
        assert!(r.validate().is_err());
        r.vertices[1].chainage_m = 0.0;
        assert!(r.validate().is_err());
        r.vertices[0].chainage_m = 5.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn route_spec_forms() {
        let w: RouteSpec = serde_json::from_str(
            r#"{"slack_factor":1.0,"waypoints":[{"lat":0,"lon":0},{"lat":0,"lon":1}]}"#,
        )
        .unwrap();
        let r = w.into_route().unwrap();
        let v: RouteSpec = serde_json::from_str(&format!(
            r#"{{"vertices":[{{"lat":0,"lon":0,"chainage_m":0}},{{"lat":0,"lon":1,"chainage_m":{}}}]}}"#,
            r.vertices[1].chainage_m
        ))
        .unwrap();
        assert_eq!(v.into_route().unwrap().vertices, r.vertices);
    }
}
