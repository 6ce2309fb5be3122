use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a discretized sensing-parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, steps: usize) -> Result<Self> {
        let axis = Axis {
            name: name.into(),
            lower,
            upper,
            steps,
        };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::InvalidSpace(format!(
                "axis `{}` has non-finite bounds",
                self.name
            )));
        }
        if self.lower >= self.upper {
            return Err(Error::InvalidSpace(format!(
                "axis `{}`: lower {} must be below upper {}",
                self.name, self.lower, self.upper
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidSpace(format!(
                "axis `{}` needs at least one step",
                self.name
            )));
        }
        Ok(())
    }

    /// Grid value at coordinate `i`: `lower + i * (upper - lower) / (steps - 1)`.
    /// A single-step axis sits at its lower bound.
    pub fn value(&self, i: usize) -> f64 {
        if self.steps == 1 {
            return self.lower;
        }
        if i + 1 == self.steps {
            return self.upper;
        }
        self.lower + i as f64 * (self.upper - self.lower) / (self.steps - 1) as f64
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// A point in the sensing-parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorOption {
    pub values: Vec<f64>,
    /// Grid coordinate per axis, when the option was drawn from a grid.
    pub axis_index: Option<Vec<usize>>,
}

impl SensorOption {
    /// A free (off-grid) option. Values must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "non-finite parameter in {values:?}"
            )));
        }
        Ok(SensorOption {
            values,
            axis_index: None,
        })
    }

    pub fn value(&self, axis: usize) -> Option<f64> {
        self.values.get(axis).copied()
    }
}

/// Finite rectangular grid of sensor options. Enumeration is row-major:
/// the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpace {
    axes: Vec<Axis>,
}

impl OptionSpace {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidSpace("no axes".into()));
        }
        for axis in &axes {
            axis.validate()?;
        }
        Ok(OptionSpace { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn total_size(&self) -> usize {
        self.axes.iter().map(|a| a.steps).product()
    }

    /// Row-major grid coordinates of flat index `index`.
    pub fn coords(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total_size() {
            return Err(Error::out_of_range(
                "option index",
                index,
                format!("[0, {})", self.total_size()),
            ));
        }
        let mut coords = vec![0; self.axes.len()];
        let mut rest = index;
        for (slot, axis) in coords.iter_mut().zip(&self.axes).rev() {
            *slot = rest % axis.steps;
            rest /= axis.steps;
        }
        Ok(coords)
    }

    pub fn index_of_coords(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.axes.len() {
            return Err(Error::DimensionMismatch {
                context: "grid coordinates",
                expected: self.axes.len(),
                actual: coords.len(),
            });
        }
        let mut index = 0;
        for (&c, axis) in coords.iter().zip(&self.axes) {
            if c >= axis.steps {
                return Err(Error::out_of_range(
                    "grid coordinate",
                    c,
                    format!("[0, {}) on axis `{}`", axis.steps, axis.name),
                ));
            }
            index = index * axis.steps + c;
        }
        Ok(index)
    }

    pub fn option(&self, index: usize) -> Result<SensorOption> {
        let coords = self.coords(index)?;
        let values = coords
            .iter()
            .zip(&self.axes)
            .map(|(&c, axis)| axis.value(c))
            .collect();
        Ok(SensorOption {
            values,
            axis_index: Some(coords),
        })
    }

    /// Flat grid index of an option carrying grid coordinates.
    pub fn index_of(&self, option: &SensorOption) -> Result<usize> {
        match &option.axis_index {
            Some(coords) => self.index_of_coords(coords),
            None => Err(Error::InvalidOption("option is not on the grid".into())),
        }
    }

    /// Every option of the grid, in row-major order.
    pub fn enumerate(&self) -> Vec<SensorOption> {
        (0..self.total_size())
            .map(|i| self.option(i).expect("index below total_size"))
            .collect()
    }

    /// Whether every value of `option` lies within the axis bounds.
    pub fn contains(&self, option: &SensorOption) -> bool {
        option.values.len() == self.axes.len()
            && option
                .values
                .iter()
                .zip(&self.axes)
                .all(|(&v, a)| v.is_finite() && a.contains(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_axis_hits_endpoints() {
        let space = OptionSpace::new(vec![Axis::new("a", 0.0, 1.0, 2).unwrap()]).unwrap();
        let values: Vec<f64> = space.enumerate().iter().map(|o| o.values[0]).collect();
        assert_eq!(values, vec![0.0, 1.0]);
    }

    #[test]
    fn two_by_three_grid() {
        let space = OptionSpace::new(vec![
            Axis::new("a", -1.0, 1.0, 3).unwrap(),
            Axis::new("b", 2.0, 4.0, 3).unwrap(),
        ])
        .unwrap();
        let all = space.enumerate();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0].values, vec![-1.0, 2.0]);
        assert_eq!(all[1].values, vec![-1.0, 3.0]);
        assert_eq!(all[3].values, vec![0.0, 2.0]);
        assert_eq!(all[8].values, vec![1.0, 4.0]);
    }

    #[test]
    fn seven_step_integer_axis() {
        let space = OptionSpace::new(vec![Axis::new("e", -3.0, 3.0, 7).unwrap()]).unwrap();
        let values: Vec<f64> = space.enumerate().iter().map(|o| o.values[0]).collect();
        assert_eq!(values, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(Axis::new("a", 1.0, 1.0, 2).is_err());
        assert!(Axis::new("a", 0.0, 1.0, 0).is_err());
        assert!(Axis::new("a", 0.0, f64::NAN, 2).is_err());
        assert!(OptionSpace::new(vec![]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let space = OptionSpace::new(vec![
            Axis::new("a", 0.0, 1.0, 4).unwrap(),
            Axis::new("b", 0.0, 1.0, 5).unwrap(),
            Axis::new("c", 0.0, 1.0, 2).unwrap(),
        ])
        .unwrap();
        for (i, opt) in space.enumerate().iter().enumerate() {
            assert_eq!(space.index_of(opt).unwrap(), i);
            assert!(space.contains(opt));
        }
        assert!(space.option(40).is_err());
    }
}
