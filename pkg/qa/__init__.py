"""QA tests for ced-schrodinger."""
