use kvlink_core::scenario::{run_multi_round, MultiRoundConfig};
use kvlink_core::{Mode, ModelSpec, Registry};

#[test]
fn ledger_invariants_over_fifty_rounds() {
    let k = ModelSpec::llama_7b().constants();
    let cfg = MultiRoundConfig {
        max_agents: 8,
        ..Default::default()
    };
    let reg = Registry::standard();
    for name in ["jmsra", "all-nl-opt", "all-kv-opt"] {
        let trace = run_multi_round(&k, &cfg, 50, 17, reg.get(name).unwrap()).unwrap();
        for t in &trace {
            let ea = t.ea.unwrap();
            assert!(
                ea.xi <= cfg.ea_window && ea.theta <= cfg.ea_context_limit && ea.xi <= ea.theta
            );
            for a in &t.agents {
                assert!(
                    a.xi >= 0.0 && a.xi <= cfg.aa_window,
                    "{name} round {}",
                    t.round
                );
                assert!(a.theta <= cfg.aa_context_limit && a.xi <= a.theta);
                if a.mode == Some(Mode::Kv) {
                    assert_eq!(a.xi, 0.0);
                }
            }
        }
    }
}

#[test]
fn debt_never_shrinks_across_token_rounds() {
    let k = ModelSpec::llama_7b().constants();
    let cfg = MultiRoundConfig {
        max_agents: 6,
        ..Default::default()
    };
    let reg = Registry::standard();
    let trace = run_multi_round(&k, &cfg, 30, 2, reg.get("jmsra").unwrap()).unwrap();
    for i in 0..cfg.max_agents {
        let mut last = 0.0;
        for t in &trace {
            let a = t.agents[i];
            match a.mode {
                Some(Mode::Nl) => assert!(a.xi >= last),
                Some(Mode::Kv) => assert_eq!(a.xi, 0.0),
                None => assert_eq!(a.xi, last),
            }
            last = a.xi;
        }
    }
}

#[test]
fn identical_inputs_identical_trace() {
    let k = ModelSpec::llama_7b().constants();
    let cfg = MultiRoundConfig::default();
    let reg = Registry::standard();
    let s = reg.get("jmsra").unwrap();
    assert_eq!(
        run_multi_round(&k, &cfg, 5, 8, s).unwrap(),
        run_multi_round(&k, &cfg, 5, 8, s).unwrap()
    );
}
