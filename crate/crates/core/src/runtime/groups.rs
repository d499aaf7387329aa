use std::ops::Range;

/// The two decompositions of the coarsest points used to distribute window
/// data. The first splits `0..n` into chunks of `k`; the second does the same
/// starting at `k - 1`. Final groups may be shorter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGroups {
    k: usize,
    first: Vec<Range<usize>>,
    second: Vec<Range<usize>>,
}

impl CommGroups {
    pub fn new(n_points: usize, k: usize) -> Self {
        assert!(k >= 1, "k must be >= 1");
        let chunks = |start: usize| {
            (start..n_points)
                .step_by(k)
                .map(|lo| lo..(lo + k).min(n_points))
                .collect::<Vec<_>>()
        };
        CommGroups {
            k,
            first: chunks(0),
            second: chunks(k - 1),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn first(&self) -> &[Range<usize>] {
        &self.first
    }

    pub fn second(&self) -> &[Range<usize>] {
        &self.second
    }

    pub fn rounds(&self) -> [&[Range<usize>]; 2] {
        [&self.first, &self.second]
    }

    /// Indices of the local grid owned by point `p`.
    pub fn window(&self, p: usize) -> Range<usize> {
        (p + 1).saturating_sub(self.k)..p + 1
    }
}
