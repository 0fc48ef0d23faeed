"""Token engine: generation, spending, checking, alerts, proofs."""

import pytest

from crowdreg.credentials import (
    GroupId,
    NonceFactory,
    digest,
    keygen,
    group_setup,
    ra_keygen,
)
from crowdreg.errors import (
    BudgetExhaustedError,
    InsufficientEvidenceError,
    MalformedEvidenceError,
    SignatureRefusedError,
)
from crowdreg.ledger import Transaction, TransactionBlock, TxKind, new_view
from crowdreg.regulation import (
    ParticipantRegistry,
    TriplePattern,
    applicable,
    compute_budget,
    expand_all,
    parse_regulation,
)
from crowdreg.tokens import (
    AlertKind,
    CheckKeys,
    ProcessContext,
    VerdictKind,
    Verdict,
    VerificationPayload,
    adjudicate,
    check,
    dump_wallets,
    generate,
    prove,
    scan_and_alert,
    scan_platform_failure,
    spend,
    verify_proof,
)

ROLE_GROUPS = {
    "worker": GroupId.WORKERS,
    "platform": GroupId.PLATFORMS,
    "requester": GroupId.REQUESTERS,
}


class World:
    """Registry, keys, credentials, wallets for a tiny crowdworking setup."""

    def __init__(self, reg_texts, workers=("w1", "w2"), platforms=("p1",), requesters=("r1",)):
        self.registry = ParticipantRegistry(workers, platforms, requesters)
        self.ra = ra_keygen(digest(b"ra-seed"))
        self.keys = {
            pid: keygen(pid, digest(b"key:" + pid.encode()))
            for pid in self.registry.all_ids()
        }
        self.publics = {pid: kp.public for pid, kp in self.keys.items()}
        self.creds = {}
        for role, group in ROLE_GROUPS.items():
            members = [self.keys[pid] for pid in self.registry.group(role)]
            self.creds.update(
                group_setup(group, members, self.ra, digest(b"grp:" + role.encode()))
            )
        self.group_publics = {
            g.value: next(
                c.group_public for c in self.creds.values() if c.group == g
            )
            for g in GroupId
        }
        self.regs = expand_all([parse_regulation(t) for t in reg_texts], self.registry)
        self.plan = compute_budget(self.regs, self.registry)
        self.wallets, self.ra_ledger = generate(
            self.plan, self.registry, self.ra, digest(b"gen-seed"), self.publics
        )
        self.check_keys = CheckKeys(self.ra.sign.public, self.group_publics)
        self.contrib = NonceFactory(digest(b"contrib"), epoch=0)
        self.views = [new_view(p, platforms) for p in platforms]
        self._task_seq = 0
        self._view_seq = {p: 0 for p in platforms}

    def submission(self, task_id, platform="p1"):
        tx = Transaction(
            kind=TxKind.SUBMISSION,
            task_id=task_id,
            payload=f"task:{task_id}".encode(),
            involved_platforms=(platform,),
            required_contributions=1,
        )
        self._append(tx, platform)
        return tx

    def _append(self, tx, platform):
        view = next(v for v in self.views if v.platform == platform)
        self._view_seq[platform] += 1
        view.append_block(
            TransactionBlock(tx, ((platform, self._view_seq[platform]),), ())
        )

    def run_process(self, worker, requester="r1", platform="p1", task_id=None, commit=True,
                    stolen=None, refuse=None):
        """Spend for one process and optionally commit its verification tx."""
        if task_id is None:
            self._task_seq += 1
            task_id = f"t{self._task_seq}"
        sub = self.submission(task_id, platform)
        process = ProcessContext(worker, platform, requester, task_id, sub.digest)
        regs = applicable(self.regs, process.tuple_())
        view = next(v for v in self.views if v.platform == platform)
        bundle = spend(
            process, regs, self.wallets, view, self.creds,
            self.keys[platform], self.contrib, refuse=refuse, stolen=stolen,
        )
        tx = self.verification_tx(task_id, platform, sub, [bundle])
        if commit:
            self.commit(tx)
        return process, sub, bundle, tx

    def verification_tx(self, task_id, platform, sub, bundles):
        payload = VerificationPayload(task_id=task_id, bundles=tuple(bundles))
        return Transaction(
            kind=TxKind.VERIFICATION,
            task_id=task_id,
            payload=payload.serialize(),
            involved_platforms=(platform,),
            parent_submission=sub.digest,
            bundle=payload,
        )

    def commit(self, tx):
        for view in self.views:
            self._view_seq[view.platform] += 1
            view.append_block(
                TransactionBlock(tx, ((view.platform, self._view_seq[view.platform]),), ())
            )


class TestGenerate:
    def test_each_target_holds_every_copy(self):
        w = World(["((w1, p1, r1), <, 26)"])
        pattern = TriplePattern("w1", "p1", "r1")
        for holder in ("w1", "p1", "r1"):
            recs = w.wallets[holder].etokens[pattern]
            assert len(recs) == 25
        nonces = {r.nonce.value for r in w.wallets["w1"].etokens[pattern]}
        assert nonces == {r.nonce.value for r in w.wallets["p1"].etokens[pattern]}

    def test_zero_count_pattern_gets_empty_wallets(self):
        w = World(["((w1, p1, r1), <, 1)"])
        assert w.wallets["w1"].etokens.get(TriplePattern("w1", "p1", "r1"), []) == []

    def test_lambda_is_co_target_public_keys(self):
        w = World(["((w1, p1, r1), <, 3)"])
        rec = w.wallets["w1"].etokens[TriplePattern("w1", "p1", "r1")][0]
        assert rec.lam == (w.publics["p1"], w.publics["r1"])
        single = World(["((w1, *, *), <, 3)"])
        rec = single.wallets["w1"].etokens[TriplePattern("w1", "*", "*")][0]
        assert rec.lam == ()

    def test_vtoken_counts_follow_theta_min_formula(self):
        w = World(["((w, p1, r1), <, 3)"], workers=("w",), platforms=("p1",), requesters=("r1",))
        assert w.plan.theta_min == 2
        tup = ("w", "p1", "r1")
        for owner in tup:
            assert len(w.wallets[owner].vtokens[tup]) == 2
        v_nonces = [rec for rec in w.ra_ledger.records.values() if rec.kind == "v"]
        assert len(v_nonces) == 2 * 1 * 1 * 1

    def test_all_nonces_unique_across_epoch(self):
        w = World(["((forall, *, *), <, 5)"])
        assert len(w.ra_ledger) == len(set(w.ra_ledger.records))

    def test_wallet_dump_shape(self):
        import json

        w = World(["((w1, *, *), <, 2)"])
        rows = [json.loads(line) for line in dump_wallets(w.wallets)]
        assert all({"owner", "kind", "nonce_hex", "spent"} <= set(r) for r in rows)


class TestSpend:
    def test_budget_exhaustion_at_second_spend(self):
        w = World(["((w1, *, *), <, 2)"])  # one token
        w.run_process("w1")
        with pytest.raises(BudgetExhaustedError):
            w.run_process("w1")

    def test_single_target_platform_initiates_all_cosign(self):
        w = World(["((*, p1, *), <, 3)"])
        process, sub, bundle, tx = w.run_process("w1")
        entry = bundle.entries[0]
        groups = {(g, s) for g, s, _ in entry.group_sigs}
        assert groups == {
            (g.value, s)
            for g in GroupId
            for s in ("token", "token_task")
        }
        # the platform's wallet paid
        pattern = TriplePattern("*", "p1", "*")
        assert sum(1 for r in w.wallets["p1"].etokens[pattern] if r.spent) == 1

    def test_worker_initiates_when_worker_is_a_target(self):
        w = World(["((w1, p1, r1), <, 3)"])
        w.run_process("w1")
        pattern = TriplePattern("w1", "p1", "r1")
        assert any(r.spent for r in w.wallets["w1"].etokens[pattern])

    def test_lowest_nonce_spent_first(self):
        w = World(["((w1, *, *), <, 4)"])
        pattern = TriplePattern("w1", "*", "*")
        lowest = min(r.nonce.value for r in w.wallets["w1"].etokens[pattern])
        _, _, bundle, _ = w.run_process("w1")
        assert bundle.entries[0].nonce.value == lowest

    def test_refusal_surfaces(self):
        w = World(["((w1, *, *), <, 3)"])
        with pytest.raises(SignatureRefusedError):
            w.run_process("w1", refuse=lambda participant, nonce: participant == "r1")

    def test_transcripts_recorded_for_all_participants(self):
        w = World(["((w1, *, *), <, 3)"])
        w.run_process("w1")
        for pid in ("w1", "p1", "r1"):
            assert w.wallets[pid].transcripts


class TestCheck:
    def test_fresh_valid_bundle(self):
        w = World(["((w1, *, *), <, 3)"])
        sub = w.submission("tx1")
        process = ProcessContext("w1", "p1", "r1", "tx1", sub.digest)
        bundle = spend(
            process, applicable(w.regs, process.tuple_()), w.wallets, w.views[0],
            w.creds, w.keys["p1"], w.contrib,
        )
        tx = w.verification_tx("tx1", "p1", sub, [bundle])
        assert check(tx, w.views, w.check_keys) == Verdict.VALID

    def test_second_submission_of_same_nonce_is_replayed(self):
        w = World(["((w1, *, *), <, 3)"])
        process, sub, bundle, tx = w.run_process("w1")  # committed
        sub2 = w.submission("replay-task")
        replay_tx = Transaction(
            kind=TxKind.VERIFICATION,
            task_id="replay-task",
            payload=b"replayed",
            involved_platforms=("p1",),
            parent_submission=sub2.digest,
            bundle=VerificationPayload(
                "replay-task",
                (type(bundle)(task_id="replay-task", entries=(
                    type(bundle.entries[0])(
                        token_kind=bundle.entries[0].token_kind,
                        nonce=bundle.entries[0].nonce,
                        ra_sig=bundle.entries[0].ra_sig,
                        task_digest=sub2.digest,
                        contribution_id=bundle.entries[0].contribution_id,
                        request_sig=bundle.entries[0].request_sig,
                        group_sigs=bundle.entries[0].group_sigs,
                    ),
                )),),
            ),
        )
        verdict = check(replay_tx, w.views, w.check_keys)
        assert verdict in (Verdict.REPLAYED, Verdict.FORGED)
        # same bundle resubmitted verbatim under a new tx is cleanly replayed
        dup_tx = w.verification_tx("dup", "p1", sub, [bundle])
        assert check(dup_tx, w.views, w.check_keys) == Verdict.REPLAYED

    def test_random_ra_sig_is_forged(self):
        from dataclasses import replace

        w = World(["((w1, *, *), <, 3)"])
        sub = w.submission("tf")
        process = ProcessContext("w1", "p1", "r1", "tf", sub.digest)
        bundle = spend(
            process, applicable(w.regs, process.tuple_()), w.wallets, w.views[0],
            w.creds, w.keys["p1"], w.contrib,
        )
        bad_entry = replace(bundle.entries[0], ra_sig=b"\x99" * 64)
        bad_bundle = type(bundle)(task_id="tf", entries=(bad_entry,))
        tx = w.verification_tx("tf", "p1", sub, [bad_bundle])
        assert check(tx, w.views, w.check_keys) == Verdict.FORGED

    def test_task_digest_mismatch_is_forged(self):
        from dataclasses import replace

        w = World(["((w1, *, *), <, 3)"])
        sub = w.submission("tm")
        process = ProcessContext("w1", "p1", "r1", "tm", sub.digest)
        bundle = spend(
            process, applicable(w.regs, process.tuple_()), w.wallets, w.views[0],
            w.creds, w.keys["p1"], w.contrib,
        )
        other = w.submission("other")
        swapped = replace(bundle.entries[0], task_digest=other.digest)
        tx = w.verification_tx("tm", "p1", sub, [type(bundle)(task_id="tm", entries=(swapped,))])
        assert check(tx, w.views, w.check_keys) == Verdict.FORGED


class TestAlerts:
    def test_honest_run_produces_no_alerts(self):
        w = World(["((w1, *, *), <, 4)"])
        w.run_process("w1")
        w.run_process("w1")
        for pid in w.registry.all_ids():
            assert scan_and_alert(pid, w.wallets[pid], w.views) == []

    def steal_and_spend(self, w):
        """w2 steals one of w1's tokens and spends it on w2's own process."""
        import copy

        victim_pattern = TriplePattern("w1", "*", "*")
        stolen_rec = copy.deepcopy(w.wallets["w1"].etokens[victim_pattern][0])
        # w2 substitutes the stolen token when asked to pay from its own pool
        process, sub, bundle, tx = w.run_process(
            "w2", stolen={TriplePattern("w2", "*", "*"): stolen_rec}, task_id="stolen-task"
        )
        return stolen_rec, process, tx

    def test_relay_alert_fires_for_stolen_token(self):
        w = World(["((w1, *, *), <, 4)", "((forall, *, *), <, 9)"])
        stolen_rec, process, tx = self.steal_and_spend(w)
        alerts = scan_and_alert("w1", w.wallets["w1"], w.views)
        assert [a.kind for a in alerts] == [AlertKind.RELAY]
        assert alerts[0].nonce.value == stolen_rec.nonce.value

    def test_adjudicate_names_the_thief(self):
        w = World(["((w1, *, *), <, 4)", "((forall, *, *), <, 9)"])
        self.steal_and_spend(w)
        alert = scan_and_alert("w1", w.wallets["w1"], w.views)[0]
        verdict = adjudicate(
            w.ra, alert, w.views, w.registry, w.ra_ledger, w.publics
        )
        assert verdict.kind == VerdictKind.TRUE_POSITIVE
        assert verdict.subject == "w2"

    def test_wrong_task_variant_raises_alert(self):
        w = World(["((w1, *, *), <, 4)"])
        process, sub, bundle, tx = w.run_process("w1")
        # tamper with the victim's wallet record to simulate a spend the
        # owner made for a different task than the one committed
        rec = w.wallets["w1"].received_nonces()[bundle.entries[0].nonce.value]
        rec.task_digest = digest(b"some other task")
        alerts = scan_and_alert("w1", w.wallets["w1"], w.views)
        assert [a.kind for a in alerts] == [AlertKind.RELAY]

    def test_self_alert_is_false_positive(self):
        w = World(["((w1, *, *), <, 4)"])
        process, sub, bundle, tx = w.run_process("w1")
        from crowdreg.tokens import AlertReport

        spurious = AlertReport(
            reporter="w1",
            kind=AlertKind.RELAY,
            nonce=bundle.entries[0].nonce,
            entry=bundle.entries[0],
            tx_digest=tx.digest,
            task_digest=bundle.entries[0].task_digest,
        )
        verdict = adjudicate(w.ra, spurious, w.views, w.registry, w.ra_ledger, w.publics)
        assert verdict.kind == VerdictKind.FALSE_POSITIVE
        assert verdict.subject == "w1"

    def test_platform_failure_alert_and_verdicts(self):
        w = World(["((w1, *, *), <, 4)"])
        sub = w.submission("lost")
        process = ProcessContext("w1", "p1", "r1", "lost", sub.digest)
        spend(
            process, applicable(w.regs, process.tuple_()), w.wallets, w.views[0],
            w.creds, w.keys["p1"], w.contrib,
        )  # never committed: the platform "fails"
        alerts = scan_platform_failure("w1", w.wallets["w1"], w.views, w.publics)
        assert [a.kind for a in alerts] == [AlertKind.PLATFORM_FAILURE]
        verdict = adjudicate(
            w.ra, alerts[0], w.views, w.registry, w.ra_ledger, w.publics,
            timeout_expired=True,
        )
        assert verdict.kind == VerdictKind.TRUE_POSITIVE
        assert verdict.subject == "p1"

    def test_slow_but_correct_platform_is_false_positive(self):
        w = World(["((w1, *, *), <, 4)"])
        process, sub, bundle, tx = w.run_process("w1")  # committed in the end
        from crowdreg.tokens import AlertReport

        stale = AlertReport(
            reporter="w1",
            kind=AlertKind.PLATFORM_FAILURE,
            platform="p1",
            task_digest=sub.digest,
            transcripts=tuple(w.wallets["w1"].transcripts),
        )
        verdict = adjudicate(
            w.ra, stale, w.views, w.registry, w.ra_ledger, w.publics,
            timeout_expired=True,
        )
        assert verdict.kind == VerdictKind.FALSE_POSITIVE

    def test_fabricated_evidence_rejected(self):
        w = World(["((w1, *, *), <, 4)"])
        process, sub, bundle, tx = w.run_process("w1")
        from crowdreg.tokens import AlertReport
        from dataclasses import replace

        fake = AlertReport(
            reporter="w2",  # never held this token
            kind=AlertKind.RELAY,
            nonce=bundle.entries[0].nonce,
            entry=bundle.entries[0],
        )
        with pytest.raises(MalformedEvidenceError):
            adjudicate(w.ra, fake, w.views, w.registry, w.ra_ledger, w.publics)


class TestProofs:
    def make_world(self):
        return World(
            ["((forall, *, *), <, 9)", "((w1, *, *), >, 4)"],
            workers=("w1", "w2"),
        )

    def test_five_processes_prove_threshold_four(self):
        w = self.make_world()
        for _ in range(5):
            w.run_process("w1")
        reg = next(r for r in w.regs if r.pattern.worker == "w1" and r.kind.value == "verifiable")
        proof = prove("w1", reg, w.wallets["w1"], w.views)
        assert len(proof.components) == 5
        assert verify_proof(proof, w.views, w.ra.sign.public)

    def test_four_processes_insufficient(self):
        w = self.make_world()
        for _ in range(4):
            w.run_process("w1")
        reg = next(r for r in w.regs if r.pattern.worker == "w1" and r.kind.value == "verifiable")
        with pytest.raises(InsufficientEvidenceError):
            prove("w1", reg, w.wallets["w1"], w.views)

    def test_single_process_proof_of_size_one(self):
        w = World(["((forall, *, *), <, 9)", "((w1, p1, r1), >, 0)"])
        w.run_process("w1")
        reg = next(r for r in w.regs if r.kind.value == "verifiable")
        proof = prove("w1", reg, w.wallets["w1"], w.views)
        assert len(proof.components) == 1
        assert verify_proof(proof, w.views, w.ra.sign.public)

    def test_duplicate_nonce_fails_verification(self):
        from dataclasses import replace

        w = self.make_world()
        for _ in range(5):
            w.run_process("w1")
        reg = next(r for r in w.regs if r.pattern.worker == "w1" and r.kind.value == "verifiable")
        proof = prove("w1", reg, w.wallets["w1"], w.views)
        doubled = replace(proof, components=proof.components[:-1] + (proof.components[0],))
        assert not verify_proof(doubled, w.views, w.ra.sign.public)

    def test_unspent_nonce_fails_verification(self):
        w = self.make_world()
        for _ in range(5):
            w.run_process("w1")
        reg = next(r for r in w.regs if r.pattern.worker == "w1" and r.kind.value == "verifiable")
        proof = prove("w1", reg, w.wallets["w1"], w.views)
        # forge a component around an issued-but-unspent v-token
        unspent = next(
            rec
            for recs in w.wallets["w1"].vtokens.values()
            for rec in recs
            if not rec.spent
        )
        from crowdreg.tokens import ProofComponent
        from dataclasses import replace

        bindings = tuple(
            (role, element, unspent.priv[role])
            for role, element in reg.pattern.targets()
        )
        fake = ProofComponent(nonce=unspent.nonce, owner="w1", bindings=bindings)
        tampered = replace(proof, components=proof.components[:-1] + (fake,))
        assert not verify_proof(tampered, w.views, w.ra.sign.public)
