/// Recovered quantity plus the diagnostics gathered while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport<T> {
    pub recovered: T,
    /// Iterations performed (1 for direct solvers).
    pub iterations: usize,
    pub converged: bool,
    /// Data misfit per iteration (a single entry for direct solvers).
    pub residual_history: Vec<f64>,
    /// Relative L² error against the ground truth per iteration, if known.
    pub error_history: Vec<f64>,
    /// Norm of the change between successive iterates.
    pub update_history: Vec<f64>,
    /// Named regularization or solver parameters actually used.
    pub parameters: Vec<(String, f64)>,
    /// Final relative L² error against the ground truth, if known.
    pub rel_error: Option<f64>,
}

impl<T> ReconstructionReport<T> {
    pub fn new(recovered: T) -> Self {
        ReconstructionReport {
            recovered,
            iterations: 1,
            converged: true,
            residual_history: Vec::new(),
            error_history: Vec::new(),
            update_history: Vec::new(),
            parameters: Vec::new(),
            rel_error: None,
        }
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .find(|(k, _)| k == name)
            .map(|&(_, v)| v)
    }
}
