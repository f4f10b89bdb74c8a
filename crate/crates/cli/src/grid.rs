use std::str::FromStr;

/// A parameter grid given either as `lo:hi:count` (evenly spaced, both ends
/// included) or as a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let number = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [lo, hi, count] => {
                let count: usize = count
                    .trim()
                    .parse()
                    .map_err(|e| format!("'{count}': {e}"))?;
                if count == 0 {
                    return Err("a grid needs at least one point".into());
                }
                coco_clearing::studies::linspace(number(lo)?, number(hi)?, count)
            }
            [list] => list.split(',').map(number).collect::<Result<_, _>>()?,
            _ => return Err(format!("expected lo:hi:count or a comma list, got '{s}'")),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("grid '{s}' contains a non-finite value"));
        }
        Ok(Grid(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_notations() {
        assert_eq!("0:1:3".parse::<Grid>().unwrap().0, vec![0.0, 0.5, 1.0]);
        assert_eq!("0.01, 0.03".parse::<Grid>().unwrap().0, vec![0.01, 0.03]);
        assert!("0:1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("a,b".parse::<Grid>().is_err());
    }
}
