use crate::error::{EsvError, Result};

use super::SubsequenceIndex;

/// Every size-`s` subsequence of `0..n`, optionally skipping one position,
/// in lexicographic order of the sorted position lists.
pub fn enumerate_subsequences(n: usize, s: usize, excluding: Option<usize>) -> Result<Subsequences> {
    let pool: Vec<usize> = match excluding {
        Some(e) if e >= n => {
            return Err(EsvError::validation(
                "excluding",
                format!("element {e} out of range for n = {n}"),
            ))
        }
        Some(e) => (0..n).filter(|&p| p != e).collect(),
        None => (0..n).collect(),
    };
    if s > pool.len() {
        return Err(EsvError::validation(
            "subset_size",
            format!("cannot choose {s} of {} positions", pool.len()),
        ));
    }
    Ok(Subsequences {
        cursor: Some((0..s).collect()),
        pool,
    })
}

/// Iterator returned by [`enumerate_subsequences`].
///
/// Independent instances can be recreated cheaply, so parallel consumers can
/// split the stream by index range (`skip`/`take`).
#[derive(Debug, Clone)]
pub struct Subsequences {
    pool: Vec<usize>,
    cursor: Option<Vec<usize>>,
}

impl Iterator for Subsequences {
    type Item = SubsequenceIndex;

    fn next(&mut self) -> Option<SubsequenceIndex> {
        let idx = self.cursor.as_mut()?;
        let current = SubsequenceIndex::from_positions(&idx.iter().map(|&k| self.pool[k]).collect::<Vec<_>>())
            .expect("combination indices are increasing");

        // advance to the next combination
        let s = idx.len();
        let n = self.pool.len();
        let mut j = s;
        loop {
            if j == 0 {
                self.cursor = None;
                break;
            }
            j -= 1;
            if idx[j] < n - s + j {
                idx[j] += 1;
                for t in j + 1..s {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
        Some(current)
    }
}
