//! Monte-Carlo sweep harness. (under construction)
