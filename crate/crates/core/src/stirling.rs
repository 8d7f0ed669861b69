//! Stirling numbers of the second kind.

use std::sync::OnceLock;

/// Largest `s` tabulated; every entry up to here fits in a `u64`.
pub const MAX_STIRLING: usize = 20;

/// Exact table of `{s over j}` for `0 ≤ j ≤ s ≤ MAX_STIRLING`.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    rows: Vec<Vec<u64>>,
}

impl StirlingTable {
    pub fn new() -> Self {
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(MAX_STIRLING + 1);
        rows.push(vec![1]);
        for s in 1..=MAX_STIRLING {
            let prev = &rows[s - 1];
            let row = (0..=s)
                .map(|j| {
                    let stay = if j < s { j as u64 * prev[j] } else { 0 };
                    let step = if j > 0 { prev[j - 1] } else { 0 };
                    stay + step
                })
                .collect();
            rows.push(row);
        }
        StirlingTable { rows }
    }

    pub fn global() -> &'static StirlingTable {
        static TABLE: OnceLock<StirlingTable> = OnceLock::new();
        TABLE.get_or_init(StirlingTable::new)
    }

    /// `{s over j}`; zero when `j > s`. Panics if `s > MAX_STIRLING`.
    pub fn get(&self, s: usize, j: usize) -> u64 {
        assert!(
            s <= MAX_STIRLING,
            "Stirling table holds s <= {MAX_STIRLING}"
        );
        self.rows[s].get(j).copied().unwrap_or(0)
    }

    pub fn row(&self, s: usize) -> &[u64] {
        &self.rows[s]
    }
}

impl Default for StirlingTable {
    fn default() -> Self {
        Self::new()
    }
}
