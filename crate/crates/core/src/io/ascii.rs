use crate::model::GridSpec;

use super::FormatError;

/// Builds a grid from rows of text: `.` free, `#` obstacle, `C` charging
/// station, a digit `2..=9` a slow cell with that traversal duration.
/// Blank lines are skipped; all slow cells must share one duration.
pub fn grid_from_ascii(text: &str) -> Result<GridSpec, FormatError> {
    let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    let Some(first) = rows.first() else {
        return Err(FormatError::schema("ascii", "no rows"));
    };
    let cols = first.chars().count() as u32;
    let mut grid = GridSpec::new(rows.len() as u32, cols);
    let mut slow_duration = None;
    for (r, line) in rows.iter().enumerate() {
        if line.chars().count() as u32 != cols {
            return Err(FormatError::schema(
                format!("ascii line {}", r + 1),
                format!("expected {cols} columns"),
            ));
        }
        for (c, ch) in line.chars().enumerate() {
            let cell = grid.cell(r as u32, c as u32);
            match ch {
                '.' => {}
                '#' => {
                    grid.obstacles.insert(cell);
                }
                'C' | 'c' => {
                    grid.charging.insert(cell);
                }
                '2'..='9' => {
                    let d = ch.to_digit(10).expect("digit");
                    if slow_duration.is_some_and(|s| s != d) {
                        return Err(FormatError::schema(
                            format!("ascii line {}", r + 1),
                            "all slow cells must have the same duration",
                        ));
                    }
                    slow_duration = Some(d);
                    grid.slow_cells.insert(cell);
                }
                other => {
                    return Err(FormatError::schema(
                        format!("ascii line {}", r + 1),
                        format!("unexpected character `{other}`"),
                    ))
                }
            }
        }
    }
    if let Some(d) = slow_duration {
        grid.slow_duration = d;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warehouse_layout() {
        let grid = grid_from_ascii("..222222..\n.##.##.##.\n...C..C...\n").unwrap();
        assert_eq!((grid.rows, grid.cols), (3, 10));
        assert_eq!(grid.slow_cells, (3..=8).collect());
        assert_eq!(grid.obstacles, [12, 13, 15, 16, 18, 19].into());
        assert_eq!(grid.charging, [24, 27].into());
        assert_eq!(grid.slow_duration, 2);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(grid_from_ascii("...\n..\n").is_err());
        assert!(grid_from_ascii("").is_err());
        assert!(grid_from_ascii(".x.").is_err());
    }
}
