"""Experience handling, reward normalization, and batched gradient math."""

import numpy as np
import pytest

from convqa.context import ContextConfig, StaticNed, init_context
from convqa.kg import ActionEdge, EntityRef, load_kg_lines
from convqa.policy import (
    ActionSet,
    AdamState,
    PolicyParams,
    StateInput,
    entropy,
    forward,
    grad_entropy,
    grad_log_pi,
    init_params,
)
from convqa.ref_predictor import OracleRefPredictor
from convqa.trainer import (
    Experience,
    ExperienceQueue,
    TrainConfig,
    accumulate_batch_gradients,
    batch_update,
    rollout_question,
    train_epochs,
)
from convqa.user_sim import (
    ConversationScript,
    Dataset,
    GoldAnswer,
    IntentScript,
    UserSession,
)


def _action_set(seed, n_actions=4, d=6):
    rng = np.random.default_rng(seed)
    node = EntityRef("start", "start", "entity")
    edges = tuple(
        ActionEdge(node, EntityRef(f"e{i}", f"end {i}", "entity"), f"path {i}",
                   f"f{i}", reversed=False)
        for i in range(n_actions)
    )
    matrix = rng.normal(size=(n_actions, d))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    return ActionSet(edges=edges, matrix=matrix)


def _experience(seed, reward, d=6):
    rng = np.random.default_rng(seed)
    actions = _action_set(seed, d=d)
    state = StateInput(x=rng.normal(size=d),
                       start_entity=EntityRef("start", "start", "entity"))
    return Experience(state=state, actions=actions,
                      chosen_index=int(rng.integers(0, len(actions))),
                      reward=reward, next_utterance="next")


class TestExperienceQueue:
    def test_fifo_order(self):
        queue = ExperienceQueue()
        exps = [_experience(i, 1) for i in range(3)]
        queue.extend(exps)
        assert queue.dequeue(2) == exps[:2]
        assert queue.dequeue(1) == [exps[2]]

    def test_conservation_counters(self):
        queue = ExperienceQueue()
        queue.extend([_experience(i, -1) for i in range(5)])
        queue.dequeue(3)
        assert queue.enqueued == 5
        assert queue.dequeued == 3
        assert queue.enqueued == queue.dequeued + len(queue)

    def test_overdraw_rejected(self):
        queue = ExperienceQueue()
        queue.enqueue(_experience(0, 1))
        with pytest.raises(ValueError, match="dequeue"):
            queue.dequeue(2)

    def test_experience_validation(self):
        with pytest.raises(ValueError, match="reward"):
            _experience(0, reward=0)
        good = _experience(0, 1)
        with pytest.raises(IndexError):
            Experience(state=good.state, actions=good.actions, chosen_index=99,
                       reward=1, next_utterance=None)


class TestConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.alpha, cfg.rollouts, cfg.batch_size, cfg.beta,
                cfg.epochs, cfg.action_cap, cfg.top_k) == \
            (0.001, 20, 1000, 0.1, 10, 1000, 5)

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(alpha=0.0)
        with pytest.raises(ValueError):
            TrainConfig(beta=-0.1)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestRewardNormalization:
    def test_normalized_rewards_have_zero_mean_unit_std(self):
        rng = np.random.default_rng(4)
        batch = [_experience(i, int(r)) for i, r in
                 enumerate(rng.choice([-1, 1], size=40))]
        if all(e.reward == batch[0].reward for e in batch):  # force a mix
            batch[0] = _experience(0, -batch[0].reward)
        _, _, stats = accumulate_batch_gradients(batch, init_params(6), beta=0.0)
        np.testing.assert_allclose(stats["r_star_mean"], 0.0, atol=1e-9)
        np.testing.assert_allclose(stats["r_star_std"], 1.0, atol=1e-6)

    def test_uniform_rewards_fall_back_to_unit_std(self):
        """All-equal rewards normalize to all-zero returns, not a blowup."""
        batch = [_experience(i, 1) for i in range(8)]
        g_w1, g_w2, stats = accumulate_batch_gradients(batch, init_params(6), beta=0.0)
        assert stats["mean_reward"] == 1.0
        np.testing.assert_array_equal(g_w1, np.zeros_like(g_w1))
        np.testing.assert_array_equal(g_w2, np.zeros_like(g_w2))

    def test_mean_reward_reported_unnormalized(self):
        batch = [_experience(0, 1), _experience(1, 1), _experience(2, -1),
                 _experience(3, -1)]
        _, _, stats = accumulate_batch_gradients(batch, init_params(6), beta=0.0)
        assert stats["mean_reward"] == 0.0


class TestBatchGradients:
    def test_matches_per_experience_policy_gradients(self):
        """The batched matrix path equals summing the single-state gradients."""
        params = init_params(6, seed=2)
        rng = np.random.default_rng(9)
        batch = [_experience(i, int(r)) for i, r in
                 enumerate(rng.choice([-1, 1], size=10))]
        batch[0] = _experience(0, -batch[0].reward)  # guarantee both signs
        beta = 0.1
        g_w1, g_w2, _ = accumulate_batch_gradients(batch, params, beta)

        rewards = np.array([e.reward for e in batch], dtype=np.float64)
        r_star = (rewards - rewards.mean()) / rewards.std()
        want_w1 = np.zeros_like(params.w1)
        want_w2 = np.zeros_like(params.w2)
        for r, exp in zip(r_star, batch):
            lg1, lg2 = grad_log_pi(params, exp.state, exp.actions, exp.chosen_index)
            eg1, eg2 = grad_entropy(params, exp.state, exp.actions)
            want_w1 += r * lg1 + beta * eg1
            want_w2 += r * lg2 + beta * eg2
        np.testing.assert_allclose(g_w1, want_w1, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(g_w2, want_w2, rtol=1e-10, atol=1e-12)

    def test_balanced_pair_follows_reward_direction(self):
        """A +1 and a -1 on the same state push the +1 action's probability up."""
        params = init_params(6, seed=5)
        adam = AdamState.for_params(params)
        actions = _action_set(3)
        state = StateInput(x=np.random.default_rng(1).normal(size=6),
                           start_entity=EntityRef("start", "start", "entity"))
        before = forward(params, state, actions)
        batch = [
            Experience(state=state, actions=actions, chosen_index=0, reward=1,
                       next_utterance=None),
            Experience(state=state, actions=actions, chosen_index=1, reward=-1,
                       next_utterance="again"),
        ]
        queue = ExperienceQueue()
        queue.extend(batch)
        batch_update(queue, params, adam, TrainConfig(alpha=0.05, beta=0.0), batch_size=2)
        after = forward(params, state, actions)
        assert after[0] > before[0]
        assert after[1] < before[1]

    def test_entropy_pressure_flattens_the_policy(self):
        """With zero-information rewards, beta > 0 drives entropy upward."""
        params = init_params(6, seed=8)
        adam = AdamState.for_params(params)
        actions = _action_set(11)
        state = StateInput(x=np.random.default_rng(2).normal(size=6) * 3.0,
                           start_entity=EntityRef("start", "start", "entity"))
        cfg = TrainConfig(alpha=0.01, beta=0.5)
        history = [entropy(forward(params, state, actions))]
        for _ in range(100):
            queue = ExperienceQueue()
            queue.extend([
                Experience(state=state, actions=actions, chosen_index=0, reward=1,
                           next_utterance=None),
                Experience(state=state, actions=actions, chosen_index=0, reward=-1,
                           next_utterance="x"),
            ])
            batch_update(queue, params, adam, cfg, batch_size=2)
            history.append(entropy(forward(params, state, actions)))
        assert history[-1] > history[0]
        # trend, not noise: the last quarter sits above the first quarter
        assert np.mean(history[-25:]) > np.mean(history[:25])

    def test_batch_update_requires_enough_experiences(self):
        queue = ExperienceQueue()
        queue.enqueue(_experience(0, 1))
        params = init_params(6)
        with pytest.raises(ValueError, match="queue holds"):
            batch_update(queue, params, AdamState.for_params(params),
                         TrainConfig(batch_size=10))


def _tiny_world():
    """Two-entity context over a 3-edge star; gold is one specific neighbor."""
    kg = load_kg_lines([
        "f1\thub|Hub Topic\tp1|points at\tgold|Right Answer",
        "f2\thub|Hub Topic\tp2|points toward\twrong1|Wrong One",
        "f3\thub|Hub Topic\tp3|points into\twrong2|Wrong Two",
        "f4\tside|Side Topic\tp4|mentions\tgold|Right Answer",
    ])
    intent = IntentScript(
        intent_id="i0", utterances=("what does hub point at", "hub target please"),
        gold_answers=(GoldAnswer(label="Right Answer", id="gold"),))
    conv = ConversationScript(conversation_id="c0", domain="test",
                              intents=(intent,))
    return kg, Dataset(conversations=(conv,))


class TestRollouts:
    def test_rollout_count_is_entities_times_rollouts(self):
        kg, dataset = _tiny_world()
        ned = StaticNed({"what does hub point at": {"hub": 1.0, "side": 1.0}})
        ctx = init_context("what does hub point at", kg, ned)
        assert len(ctx.context_entities) == 2
        session = UserSession(kind="ideal", script=dataset.conversations[0])
        session.start()
        from convqa.embeddings import HashEmbeddingProvider
        emb = HashEmbeddingProvider(d=16)
        params = init_params(16, seed=0)
        cfg = TrainConfig(rollouts=20, batch_size=50)
        result = rollout_question("what does hub point at", ctx, kg, params, session,
                                  OracleRefPredictor(dataset), emb, cfg,
                                  ContextConfig(), np.random.default_rng(0))
        assert len(result.experiences) == 40
        assert result.skipped_starts == 0

    def test_edgeless_start_is_skipped_and_counted(self):
        kg, dataset = _tiny_world()
        # "gold" has edges (reversed ones), "orphan" does not exist in adjacency
        kg.entities["orphan"] = EntityRef("orphan", "Orphan", "entity")
        ned = StaticNed({"what does hub point at": {"hub": 1.0, "orphan": 1.0}})
        ctx = init_context("what does hub point at", kg, ned)
        session = UserSession(kind="ideal", script=dataset.conversations[0])
        session.start()
        from convqa.embeddings import HashEmbeddingProvider
        emb = HashEmbeddingProvider(d=16)
        cfg = TrainConfig(rollouts=5, batch_size=50)
        result = rollout_question("what does hub point at", ctx, kg,
                                  init_params(16, seed=0), session,
                                  OracleRefPredictor(dataset), emb, cfg,
                                  ContextConfig(), np.random.default_rng(0))
        assert result.skipped_starts == 1
        assert len(result.experiences) == 5

    def test_rewards_reflect_peeked_feedback(self):
        """Correct endpoints earn +1 (the user moves on or finishes); wrong
        endpoints earn -1 (the scripted user rephrases)."""
        kg, dataset = _tiny_world()
        ned = StaticNed({"what does hub point at": {"hub": 1.0}})
        ctx = init_context("what does hub point at", kg, ned)
        session = UserSession(kind="ideal", script=dataset.conversations[0])
        session.start()
        from convqa.embeddings import HashEmbeddingProvider
        emb = HashEmbeddingProvider(d=16)
        cfg = TrainConfig(rollouts=50, batch_size=999)
        result = rollout_question("what does hub point at", ctx, kg,
                                  init_params(16, seed=1), session,
                                  OracleRefPredictor(dataset), emb, cfg,
                                  ContextConfig(), np.random.default_rng(3))
        for exp in result.experiences:
            endpoint = exp.actions.edges[exp.chosen_index].end
            if endpoint.id == "gold":
                assert exp.reward == 1
            else:
                assert exp.reward == -1

    def test_peeking_leaves_session_unmoved(self):
        kg, dataset = _tiny_world()
        ned = StaticNed({"what does hub point at": {"hub": 1.0}})
        ctx = init_context("what does hub point at", kg, ned)
        session = UserSession(kind="ideal", script=dataset.conversations[0])
        session.start()
        cursor_before = vars(session.cursor).copy()
        from convqa.embeddings import HashEmbeddingProvider
        rollout_question("what does hub point at", ctx, kg, init_params(16, seed=0),
                         session, OracleRefPredictor(dataset),
                         HashEmbeddingProvider(d=16), TrainConfig(rollouts=10),
                         ContextConfig(), np.random.default_rng(0))
        assert vars(session.cursor) == cursor_before


class TestTrainEpochs:
    def test_epoch_flush_leaves_queue_empty(self):
        kg, dataset = _tiny_world()
        ned = StaticNed({"what does hub point at": {"hub": 1.0},
                         "hub target please": {}})
        from convqa.embeddings import HashEmbeddingProvider
        emb = HashEmbeddingProvider(d=16)
        params = init_params(16, seed=0)
        cfg = TrainConfig(alpha=0.01, rollouts=10, batch_size=15, beta=0.0,
                          epochs=2, seed=0)
        result = train_epochs(dataset, kg, params, emb, ned,
                              OracleRefPredictor(dataset), cfg, ContextConfig())
        assert len(result.queue) == 0
        assert result.queue.enqueued == result.queue.dequeued
        assert len(result.epoch_stats) == 2

    def test_log_lines_carry_epoch_batch_and_stats(self):
        kg, dataset = _tiny_world()
        ned = StaticNed({"what does hub point at": {"hub": 1.0},
                         "hub target please": {}})
        from convqa.embeddings import HashEmbeddingProvider
        params = init_params(16, seed=0)
        cfg = TrainConfig(alpha=0.01, rollouts=10, batch_size=15, beta=0.0,
                          epochs=1, seed=0)
        result = train_epochs(dataset, kg, params, HashEmbeddingProvider(d=16), ned,
                              OracleRefPredictor(dataset), cfg, ContextConfig())
        assert result.log_lines
        fields = result.log_lines[0].split("\t")
        assert len(fields) == 5
        assert fields[0] == "0" and fields[1] == "0"
        float(fields[2]), float(fields[3])  # formatted numbers parse back

    def test_learns_the_tiny_task(self):
        """Greedy accuracy reaches 1.0 on a 3-arm task within a few epochs."""
        kg, dataset = _tiny_world()
        ned = StaticNed({"what does hub point at": {"hub": 1.0},
                         "hub target please": {}})
        from convqa.embeddings import HashEmbeddingProvider
        emb = HashEmbeddingProvider(d=16)
        params = init_params(16, seed=0)
        cfg = TrainConfig(alpha=0.05, rollouts=20, batch_size=20, beta=0.0,
                          epochs=6, seed=0)
        result = train_epochs(dataset, kg, params, emb, ned,
                              OracleRefPredictor(dataset), cfg, ContextConfig())
        assert result.epoch_stats[-1]["greedy_accuracy"] == 1.0
