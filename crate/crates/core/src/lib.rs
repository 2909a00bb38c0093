//! Desk-scale simulation of entanglement certification protocols, local
//! hidden-variable models and the postselection machinery that simulates them.

pub mod qcore;
pub mod witness;
pub mod games;
pub mod par;
pub mod tcf;
pub mod rsp;
pub mod lhv;
pub mod postsim;
pub mod certify;
pub mod selftest;
pub mod cli;

/// Guide chapters, compiled as doc-tests.
pub mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/states.md")]
    pub mod states {}
    #[doc = include_str!("../../../book/src/games.md")]
    pub mod games {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/certification.md")]
    pub mod certification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
