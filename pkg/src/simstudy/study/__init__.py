"""The "bet on sparsity" example study: lasso versus ridge on sparse linear models."""
