use serde::Serialize;

use super::order_free_mean;
use crate::error::{Error, Result};
use crate::navgraph::Vec3;

/// An episode succeeds when it stops within this distance of the goal.
pub const SUCCESS_RADIUS_M: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NavEpisode {
    pub id: String,
    pub path: Vec<Vec3>,
    pub goal: Vec3,
    /// Shortest-path distance from the start to the goal.
    pub shortest_goal_distance: f64,
}

impl NavEpisode {
    pub fn new(id: impl Into<String>, path: Vec<Vec3>, goal: Vec3, shortest_goal_distance: f64) -> Result<Self> {
        let id = id.into();
        if path.is_empty() {
            return Err(Error::InvalidInput(format!("episode \"{id}\" has an empty path")));
        }
        if !(shortest_goal_distance.is_finite() && shortest_goal_distance >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "episode \"{id}\" has shortest distance {shortest_goal_distance}"
            )));
        }
        if !goal.is_finite() || path.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("episode \"{id}\" has non-finite coordinates")));
        }
        Ok(Self { id, path, goal, shortest_goal_distance })
    }

    pub fn length(&self) -> f64 {
        self.path.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    pub fn error(&self) -> f64 {
        self.path.last().expect("non-empty path").distance(&self.goal)
    }

    pub fn success(&self) -> bool {
        self.error() <= SUCCESS_RADIUS_M
    }

    pub fn spl(&self) -> f64 {
        if !self.success() {
            return 0.0;
        }
        let taken = self.length();
        let shortest = self.shortest_goal_distance;
        let denom = taken.max(shortest);
        if denom == 0.0 {
            1.0
        } else {
            shortest / denom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NavigationReport {
    pub tl: f64,
    pub ne: f64,
    pub sr: f64,
    pub spl: f64,
    pub episodes: usize,
}

/// Mean trajectory length, navigation error, success rate and SPL.
pub fn navigation_metrics(episodes: &[NavEpisode]) -> Result<NavigationReport> {
    if episodes.is_empty() {
        return Err(Error::InvalidInput("no episodes to evaluate".into()));
    }
    let collect = |f: &dyn Fn(&NavEpisode) -> f64| order_free_mean(episodes.iter().map(f).collect());
    Ok(NavigationReport {
        tl: collect(&|e| e.length()),
        ne: collect(&|e| e.error()),
        sr: collect(&|e| if e.success() { 1.0 } else { 0.0 }),
        spl: collect(&|e| e.spl()),
        episodes: episodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(points: &[[f64; 3]], goal: [f64; 3], shortest: f64) -> NavEpisode {
        NavEpisode::new("e", points.iter().map(|&p| p.into()).collect(), goal.into(), shortest).unwrap()
    }

    #[test]
    fn perfect_episode() {
        let e = ep(&[[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]], [3.0, 4.0, 0.0], 5.0);
        let r = navigation_metrics(&[e]).unwrap();
        assert_eq!((r.tl, r.ne, r.sr, r.spl), (5.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn success_radius() {
        assert!(ep(&[[0.0, 0.0, 0.0]], [2.9, 0.0, 0.0], 2.9).success());
        assert!(ep(&[[0.0, 0.0, 0.0]], [3.0, 0.0, 0.0], 3.0).success());
        assert!(!ep(&[[0.0, 0.0, 0.0]], [3.01, 0.0, 0.0], 3.01).success());
    }

    #[test]
    fn spl_arithmetic() {
        let e = ep(&[[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], [0.0, 1.0, 0.0], 10.0);
        assert_eq!(e.length(), 20.0);
        assert_eq!(e.spl(), 0.5);
        let still = ep(&[[1.0, 1.0, 0.0]], [1.0, 1.0, 0.0], 0.0);
        assert_eq!(still.spl(), 1.0);
        let failed = ep(&[[0.0, 0.0, 0.0]], [9.0, 0.0, 0.0], 9.0);
        assert_eq!(failed.spl(), 0.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(NavEpisode::new("x", vec![], Vec3::default(), 0.0).is_err());
        assert!(NavEpisode::new("x", vec![Vec3::default()], Vec3::default(), -1.0).is_err());
        assert!(navigation_metrics(&[]).is_err());
    }
}
