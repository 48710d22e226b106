//! Acceptance checks for the workspace. Everything lives in `tests/acceptance.rs`;
//! this package sorts after the others so a failing check does not stop the
//! remaining suites of a workspace test run.
