//! Seeded randomized checks. Each returns a one-line summary on success and
//! the first counterexample on failure, so the same code backs both the
//! plain integration tests and the acceptance report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sharp_core::generators::{GeneratorError, LlmClient, LlmEndpointConfig};
use sharp_core::graph::SceneGraph;
use sharp_core::metrics::{evaluate, TokenizedPair};
use sharp_core::plan::{run_episode, EpisodeConfig, GeneratorRequest, Termination, END_TOKEN};
use sharp_core::route::{apply_clause, plan_route, AgentPose, Heading, RouteClause, TurnDirection};
use sharp_core::scene::ObjectId;

use super::fixtures_dir;
use super::oracles::{bfs_len, brute_knn, dgm_oracle, random_route_case, random_scene, ROUTE_CELL};
use super::scripted::Scripted;
use super::stub_server::{StubReply, StubServer};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

// ---- metrics ----

fn golden_pairs() -> Vec<TokenizedPair> {
    let raw = fs::read_to_string(fixtures_dir().join("metrics/golden_pairs.jsonl")).expect("golden pairs");
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            let refs: Vec<&str> = v["references"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| r.as_str().unwrap())
                .collect();
            TokenizedPair::from_texts(v["candidate"].as_str().unwrap(), &refs)
        })
        .collect()
}

pub fn metrics_golden() -> Check {
    let golden: Value =
        serde_json::from_str(&fs::read_to_string(fixtures_dir().join("metrics/golden_scores.json")).unwrap()).unwrap();
    let pairs = golden_pairs();
    let t0 = Instant::now();
    let report = evaluate(&pairs).map_err(|e| e.to_string())?;

    let mut worst = 0.0f64;
    let mut compare = |name: &str, got: f64, want: &Value| -> Result<(), String> {
        let want = want.as_f64().unwrap();
        let diff = (got - want).abs();
        worst = worst.max(diff);
        ensure!(diff <= 1e-9, "{name}: got {got}, oracle {want}");
        Ok(())
    };
    for n in 0..4 {
        compare(&format!("BLEU-{}", n + 1), report.bleu[n], &golden["bleu"][n])?;
    }
    compare("ROUGE-L", report.rouge_l, &golden["rouge_l"])?;
    compare("METEOR", report.meteor, &golden["meteor"])?;
    compare("CIDEr", report.cider.ok_or("CIDEr missing")?, &golden["cider"])?;

    let identity: Vec<TokenizedPair> = pairs
        .iter()
        .map(|p| TokenizedPair {
            candidate: p.candidate.clone(),
            references: vec![p.candidate.clone()],
        })
        .collect();
    let id = evaluate(&identity).map_err(|e| e.to_string())?;
    ensure!(id.bleu == [1.0; 4], "identity BLEU {:?}", id.bleu);
    ensure!(id.rouge_l == 1.0, "identity ROUGE-L {}", id.rouge_l);

    let disjoint = vec![
        TokenizedPair::from_texts("alpha beta gamma delta epsilon", &["one two three four five"]),
        TokenizedPair::from_texts("zeta eta theta iota", &["six seven eight nine ten"]),
    ];
    let dj = evaluate(&disjoint).map_err(|e| e.to_string())?;
    ensure!(
        dj.bleu == [0.0; 4] && dj.rouge_l == 0.0 && dj.meteor == 0.0 && dj.cider == Some(0.0),
        "disjoint corpus scored {dj:?}"
    );
    let elapsed = t0.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "6 pairs, max deviation {worst:.1e}, identity 1.0, disjoint 0, {} ms",
        elapsed.as_millis()
    ))
}

// ---- scene graph ----

fn weights(g: &SceneGraph) -> (BTreeMap<ObjectId, f64>, BTreeMap<(ObjectId, ObjectId), f64>) {
    (
        g.nodes().iter().map(|(id, n)| (*id, n.weight)).collect(),
        g.edges().iter().map(|(k, e)| (*k, e.weight)).collect(),
    )
}

pub fn dgm_trials(seed: u64, trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let n = rng.gen_range(5..=50);
        let scene = random_scene(&mut rng, n);
        let k = *[1usize, 2, 3, 5].choose(&mut rng).unwrap();
        let ids: Vec<ObjectId> = scene.objects.iter().map(|o| o.id).collect();
        let m = rng.gen_range(0..=5.min(n));
        // Repeats are allowed on purpose: a mention listed twice still scales once.
        let mentions: Vec<ObjectId> = (0..m).map(|_| *ids.choose(&mut rng).unwrap()).collect();

        let mut g = SceneGraph::build(&scene, k).map_err(|e| e.to_string())?;
        let (n0, e0) = weights(&g);
        let record = g.modulate(&mentions, 2.0, 1).map_err(|e| e.to_string())?;
        let (n1, e1) = weights(&g);
        let changed_nodes: BTreeSet<ObjectId> = n0.keys().filter(|id| n0[id] != n1[id]).copied().collect();
        let changed_edges: BTreeSet<(ObjectId, ObjectId)> =
            e0.keys().filter(|key| e0[key] != e1[key]).copied().collect();
        let (want_nodes, want_edges) = dgm_oracle(&scene, k, &mentions);
        ensure!(
            changed_nodes == want_nodes && changed_edges == want_edges,
            "trial {t}: n={n} k={k} mentions={mentions:?}: changed nodes {changed_nodes:?} edges {changed_edges:?}, \
             oracle nodes {want_nodes:?} edges {want_edges:?}"
        );
        ensure!(
            record.touched_nodes == want_nodes && record.touched_edges == want_edges,
            "trial {t}: modulation record disagrees with the oracle"
        );
        ensure!(
            changed_nodes.iter().all(|id| n1[id] == 2.0 * n0[id])
                && changed_edges.iter().all(|key| e1[key] == 2.0 * e0[key]),
            "trial {t}: an element was scaled more than once"
        );

        g.reset_weights();
        g.modulate(&mentions, 1.0, 1).map_err(|e| e.to_string())?;
        ensure!(
            weights(&g) == (n0.clone(), e0.clone()),
            "trial {t}: w_l = 1 changed a weight"
        );

        for step in 1..=3 {
            let extra: Vec<ObjectId> = ids.choose_multiple(&mut rng, 2).copied().collect();
            g.modulate(&extra, 2.0, step).map_err(|e| e.to_string())?;
        }
        g.reset_weights();
        ensure!(
            weights(&g) == (n0, e0),
            "trial {t}: reset did not restore construction weights"
        );
    }
    Ok(format!(
        "{trials}/{trials} trials match the union oracle; w_l = 1 inert; reset exact"
    ))
}

pub fn knn_trials(seed: u64, scenes: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0usize;
    for t in 0..scenes {
        let n = rng.gen_range(2..=40);
        let scene = random_scene(&mut rng, n);
        for k in [1usize, 2, 3, 5] {
            let g = SceneGraph::build(&scene, k).map_err(|e| e.to_string())?;
            let mut want_edges = BTreeSet::new();
            for o in &scene.objects {
                let want = brute_knn(&scene, o.id, k);
                ensure!(
                    g.neighbors(o.id) == want.as_slice(),
                    "scene {t}, n={n}, k={k}, id {}: graph {:?}, brute force {want:?}",
                    o.id,
                    g.neighbors(o.id)
                );
                want_edges.extend(want.iter().map(|&j| (o.id, j)));
                checked += 1;
            }
            let edges: BTreeSet<(ObjectId, ObjectId)> = g.edges().keys().copied().collect();
            ensure!(
                edges == want_edges,
                "scene {t}, k={k}: edge set differs from the neighbour lists"
            );
        }
    }
    Ok(format!(
        "{scenes} scenes x k in {{1,2,3,5}}, {checked} neighbour lists identical"
    ))
}

// ---- progressive generation ----

pub fn ppg_episodes(seed: u64, episodes: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut capped = 0;
    for e in 0..episodes {
        let n = rng.gen_range(5..=15);
        let scene = random_scene(&mut rng, n);
        let mut graph = SceneGraph::build(&scene, 2).map_err(|e| e.to_string())?;
        let instruction = format!("I would like things tidier, case {e}");
        let max_steps = rng.gen_range(1..=10);
        let config = EpisodeConfig {
            max_steps,
            ..EpisodeConfig::default()
        };

        if e % 3 == 2 {
            // Adversarial: the stop token never comes.
            capped += 1;
            let mut gen = Scripted::endless("Step 1: Walk forward and keep going");
            let ep =
                run_episode(&scene, &mut graph, &instruction, &mut gen, &config, false).map_err(|e| e.to_string())?;
            ensure!(
                ep.steps.len() == max_steps
                    && ep.terminated_by == Some(Termination::StepCap)
                    && gen.seen.len() == max_steps,
                "episode {e}: endless generator produced {} steps with cap {max_steps}",
                ep.steps.len()
            );
            continue;
        }

        let end_at = rng.gen_range(1..=max_steps);
        let mut replies: Vec<String> = (1..=end_at)
            .map(|s| {
                let a = &scene.objects[rng.gen_range(0..scene.objects.len())].category;
                let b = &scene.objects[rng.gen_range(0..scene.objects.len())].category;
                format!(
                    "Step {s}: Walk to the {a}, then move the {b} ({s}.{}).",
                    rng.gen_range(0..1000)
                )
            })
            .collect();
        if rng.gen_bool(0.5) {
            replies[0] = format!(
                "To help you, the robot assistant will tidy up, with the following steps: {}",
                replies[0]
            );
        }
        // Where the token shows up varies.
        let bare = end_at < max_steps && rng.gen_bool(0.25);
        let last = end_at - 1;
        if bare {
            replies.push(END_TOKEN.to_string());
        } else {
            match rng.gen_range(0..3) {
                0 => replies[last].push_str(" [END]"),
                1 => replies[last].push_str("[END]"),
                _ => {
                    let cut = replies[last].find(',').unwrap();
                    replies[last].insert_str(cut + 1, " [END]");
                }
            }
        }
        // Replies past the token must never be requested.
        replies.push("Step 99: This must not be generated".into());
        let mut gen = Scripted::new(replies);
        gen.raw_token = rng.gen_bool(0.5);
        let ep = run_episode(&scene, &mut graph, &instruction, &mut gen, &config, false).map_err(|e| e.to_string())?;

        ensure!(
            ep.terminated_by == Some(Termination::EndToken),
            "episode {e}: did not stop on the token"
        );
        ensure!(
            ep.steps.len() == end_at,
            "episode {e}: {} steps, token after step {end_at}",
            ep.steps.len()
        );
        ensure!(ep.steps.len() <= max_steps, "episode {e}: cap exceeded");
        ensure!(
            gen.seen.len() == end_at + usize::from(bare),
            "episode {e}: {} requests issued",
            gen.seen.len()
        );
        ensure!(
            ep.steps.last().is_some_and(|s| s.is_final),
            "episode {e}: last step not final"
        );
        for s in &ep.steps {
            ensure!(
                !s.text.contains(END_TOKEN),
                "episode {e}: token stored in step {}: {:?}",
                s.index,
                s.text
            );
            ensure!(!s.text.is_empty(), "episode {e}: empty step {}", s.index);
        }
        for req in &gen.seen {
            ensure!(
                req.user_prompt.contains(&instruction),
                "episode {e}: instruction missing from a prompt"
            );
            for prior in ep.steps.iter().take(req.step_index - 1) {
                ensure!(
                    req.user_prompt.contains(&prior.text),
                    "episode {e}: prompt for step {} lacks step {} text {:?}",
                    req.step_index,
                    prior.index,
                    prior.text
                );
            }
        }
    }
    Ok(format!(
        "{episodes} scripted episodes ({} token-terminated, {capped} endless); history, token and cap contracts hold",
        episodes - capped
    ))
}

// ---- routes ----

fn turn_of(c: &RouteClause) -> bool {
    matches!(c, RouteClause::Turn { .. })
}

pub fn route_roundtrip(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut skipped = 0;
    let mut total_len = 0;
    while done < cases {
        let case = random_route_case(&mut rng);
        let grid = case.grid().clone();
        let free = case.free_cells();
        let goals = case.goal_cells();
        let start = *free.choose(&mut rng).unwrap();
        let Some(shortest) = bfs_len(&grid, start, &goals) else {
            skipped += 1;
            continue;
        };
        let heading = Heading::new(90 * rng.gen_range(0..4u16)).unwrap();
        let c = grid.cell_center(start);
        let mut pose = AgentPose::new(c[0], c[1], heading);
        let clauses = plan_route(&pose, case.target, &case.scene).map_err(|e| format!("case {done}: {e}"))?;

        let mut walked = 0usize;
        for clause in &clauses {
            let next = apply_clause(&pose, clause, &case.scene).map_err(|e| format!("case {done}: {e}"))?;
            if let RouteClause::Move { distance_m, .. } = clause {
                let d = distance_m.ok_or_else(|| format!("case {done}: move without a distance"))?;
                let cells = (d / ROUTE_CELL).round() as usize;
                let dir = pose.heading.direction();
                for i in 1..=cells {
                    let p = [
                        pose.position[0] + i as f64 * ROUTE_CELL * dir[0],
                        pose.position[1] + i as f64 * ROUTE_CELL * dir[1],
                    ];
                    let cell = grid
                        .cell_of(p)
                        .ok_or_else(|| format!("case {done}: walked off the grid"))?;
                    ensure!(
                        !grid.is_blocked(cell),
                        "case {done}: walked through blocked cell {cell:?}"
                    );
                }
                walked += cells;
            }
            pose = next;
        }
        ensure!(
            clauses.windows(2).all(|w| !(turn_of(&w[0]) && turn_of(&w[1]))),
            "case {done}: consecutive turns in {clauses:?}"
        );
        let end = grid
            .cell_of(pose.position)
            .ok_or_else(|| format!("case {done}: ended off the grid"))?;
        ensure!(
            goals.contains(&end),
            "case {done}: ended in {end:?}, not next to the target (start {start:?}, clauses {clauses:?})"
        );
        ensure!(
            walked == shortest,
            "case {done}: path of {walked} cells, BFS shortest {shortest}"
        );
        total_len += walked;
        done += 1;
    }
    Ok(format!(
        "{cases}/{cases} grids end next to the target on a BFS-shortest path ({total_len} cells walked, {skipped} unreachable draws resampled)"
    ))
}

pub fn turn_algebra() -> Check {
    for deg in [0u16, 90, 180, 270] {
        let h = Heading::new(deg).unwrap();
        let four = (0..4).fold(h, |acc, _| acc.turned(90, TurnDirection::Left));
        ensure!(four == h, "four left turns from {deg} gave {four}");
        let lr = h.turned(90, TurnDirection::Left).turned(90, TurnDirection::Right);
        ensure!(lr == h, "left then right from {deg} gave {lr}");
        let rl = h.turned(90, TurnDirection::Right).turned(90, TurnDirection::Left);
        ensure!(rl == h, "right then left from {deg} gave {rl}");
    }
    Ok("4 headings: left^4 = id, left.right = id, right.left = id".into())
}

// ---- language-model client ----

fn request(step_index: usize) -> GeneratorRequest {
    GeneratorRequest {
        system_context: "scene".into(),
        user_prompt: format!("Q: make tea, step {step_index}"),
        step_index,
    }
}

fn client(stub: &StubServer, max_retries: u32, backoff_ms: u64) -> LlmClient {
    let config = LlmEndpointConfig {
        base_url: stub.base_url(),
        max_retries,
        backoff_base: Duration::from_millis(backoff_ms),
        timeout: Duration::from_secs(5),
        ..LlmEndpointConfig::default()
    };
    LlmClient::with_api_key(config, "test-key").unwrap()
}

pub fn llm_robustness() -> Check {
    let stub = StubServer::start(
        vec![StubReply::chat("Step 2: Turn left. [END]")],
        StubReply::status(500, "{}"),
    );
    let reply = client(&stub, 0, 1)
        .complete(&request(2))
        .map_err(|e| format!("end detection: {e}"))?;
    ensure!(
        reply.text == "Step 2: Turn left." && reply.saw_end,
        "end detection: got {reply:?}"
    );
    let seen = stub.requests();
    ensure!(
        seen[0].authorization.as_deref() == Some("Bearer test-key") && seen[0].path == "/v1/chat/completions",
        "request line or auth header wrong: {:?}",
        seen[0]
    );

    let stub = StubServer::start(
        vec![StubReply::status(500, "boom"), StubReply::status(500, "boom")],
        StubReply::chat("Step 1: Walk to the kettle."),
    );
    let t0 = Instant::now();
    let reply = client(&stub, 3, 20)
        .complete(&request(1))
        .map_err(|e| format!("retry: {e}"))?;
    let waited = t0.elapsed();
    ensure!(reply.text == "Step 1: Walk to the kettle.", "retry: got {reply:?}");
    ensure!(
        stub.request_count() == 3,
        "retry: {} attempts instead of 3",
        stub.request_count()
    );
    // Jitter keeps each delay within [0.5, 1] of base * 2^i: at least 10 + 20 ms here.
    ensure!(
        waited >= Duration::from_millis(30),
        "retry: backoff too short ({waited:?})"
    );
    let bodies: BTreeSet<String> = stub.requests().into_iter().map(|r| r.body).collect();
    ensure!(bodies.len() == 1, "retry: request body changed between attempts");

    let stub = StubServer::start(vec![], StubReply::status(503, "busy"));
    match client(&stub, 2, 1).complete(&request(1)) {
        Err(GeneratorError::RetriesExhausted { attempts: 3, .. }) if stub.request_count() == 3 => {}
        other => return Err(format!("exhaustion: {other:?} after {} requests", stub.request_count())),
    }

    let stub = StubServer::start(vec![StubReply::status(401, "denied")], StubReply::chat("unreachable"));
    let t0 = Instant::now();
    match client(&stub, 3, 200).complete(&request(1)) {
        Err(GeneratorError::Auth(401)) => {}
        other => return Err(format!("auth: expected an auth error, got {other:?}")),
    }
    ensure!(
        stub.request_count() == 1,
        "auth: {} attempts instead of 1",
        stub.request_count()
    );
    ensure!(t0.elapsed() < Duration::from_millis(100), "auth: did not fail fast");

    let stub = StubServer::start(
        vec![],
        StubReply::chat("Step 1: Walk to the sink.").delayed(Duration::from_millis(120)),
    );
    let shared = Arc::new(client(&stub, 0, 1));
    let workers: Vec<_> = (0..12)
        .map(|i| {
            let c = Arc::clone(&shared);
            thread::spawn(move || c.complete(&request(i + 1)))
        })
        .collect();
    for w in workers {
        w.join().unwrap().map_err(|e| format!("concurrency: {e}"))?;
    }
    let peak = stub.peak_in_flight();
    ensure!(
        stub.request_count() == 12,
        "concurrency: {} requests served",
        stub.request_count()
    );
    ensure!(peak <= 4, "concurrency: stub saw {peak} simultaneous requests");
    Ok(format!(
        "[END] detected, 500x2 then 200 in 3 attempts, 401 in 1 attempt, peak in-flight {peak} of 12 concurrent calls"
    ))
}
