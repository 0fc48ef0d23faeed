"""Anonymous token budgets: generation, spending, checking, proofs, alerts.

e-tokens realize enforceable (upper-bound) regulations: each expanded pattern
gets a pool of RA-signed nonces, a copy held by every target; spending one
consumes one unit of budget. v-tokens realize verifiable (lower-bound)
regulations: one nonce per (concrete tuple, slot), with each of the three
participants holding owner-specific RA bindings they can later disclose as
proof of participation.

On the ledger a spend reveals only token public parts, group signatures, a
task digest, and a contribution id. Nothing ties an entry to a regulation or
to an identity; accountability comes from the opening envelope held by the
registration authority.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .credentials import (
    GroupCredential,
    GroupId,
    GroupSig,
    KeyPair,
    Nonce,
    NonceFactory,
    RaKeys,
    digest as hash_digest,
    group_sign,
    group_verify,
    group_open,
    sign,
    verify,
)
from .encoding import enc_bytes, enc_int, enc_seq, enc_str
from .errors import (
    BudgetExhaustedError,
    ConfigError,
    InsufficientEvidenceError,
    MalformedEvidenceError,
    SignatureRefusedError,
)
from .ledger import LedgerView, Transaction, TxKind
from .regulation import (
    BudgetPlan,
    ParticipantRegistry,
    Regulation,
    RegulationKind,
    TriplePattern,
    ROLES,
)

ROLE_GROUP = {
    "worker": GroupId.WORKERS,
    "platform": GroupId.PLATFORMS,
    "requester": GroupId.REQUESTERS,
}

# Full cartesian v-token generation above this many tuples requires an
# explicit declared-tuple list.
VTOKEN_TUPLE_CAP = 4096


def token_pub_msg(nonce: Nonce) -> bytes:
    return enc_bytes(nonce.value) + enc_int(nonce.epoch)


def tau_pub_bytes(nonce: Nonce, ra_sig: bytes) -> bytes:
    return token_pub_msg(nonce) + enc_bytes(ra_sig)


def vpriv_msg(nonce: Nonce, owner: str, role: str, element: str) -> bytes:
    return token_pub_msg(nonce) + enc_str(owner) + enc_str(role) + enc_str(element)


@dataclass
class ETokenRecord:
    """One e-token copy as held in a wallet."""

    pattern: TriplePattern
    nonce: Nonce
    ra_sig: bytes
    lam: Tuple[bytes, ...]  # co-target public keys, role-ordered
    spent: bool = False
    task_digest: Optional[bytes] = None


@dataclass
class VTokenRecord:
    """One v-token copy; same nonce is shared by all three tuple members."""

    tuple_: Tuple[str, str, str]
    nonce: Nonce
    ra_sig: bytes
    owner: str
    priv: Dict[str, bytes]  # role -> RA binding signature
    spent: bool = False
    task_digest: Optional[bytes] = None


@dataclass(frozen=True)
class Transcript:
    """A platform's signed spend request, retained as failure evidence."""

    platform: str
    task_id: str
    task_digest: bytes
    contribution_id: bytes
    nonce: Nonce
    request_sig: bytes


@dataclass
class Wallet:
    owner: str
    etokens: Dict[TriplePattern, List[ETokenRecord]] = field(default_factory=dict)
    vtokens: Dict[Tuple[str, str, str], List[VTokenRecord]] = field(default_factory=dict)
    transcripts: List[Transcript] = field(default_factory=list)

    def received_nonces(self) -> Dict[bytes, object]:
        out: Dict[bytes, object] = {}
        for recs in self.etokens.values():
            for rec in recs:
                out[rec.nonce.value] = rec
        for recs in self.vtokens.values():
            for rec in recs:
                out[rec.nonce.value] = rec
        return out

    def unspent_etoken(self, pattern: TriplePattern, exclude: Set[bytes]) -> Optional[ETokenRecord]:
        recs = [
            r
            for r in self.etokens.get(pattern, [])
            if not r.spent and r.nonce.value not in exclude
        ]
        return min(recs, key=lambda r: r.nonce.value) if recs else None

    def unspent_vtoken(self, tup: Tuple[str, str, str], exclude: Set[bytes]) -> Optional[VTokenRecord]:
        recs = [
            r
            for r in self.vtokens.get(tup, [])
            if not r.spent and r.nonce.value not in exclude
        ]
        return min(recs, key=lambda r: r.nonce.value) if recs else None

    def mark_spent(self, nonce_value: bytes, task_digest: bytes) -> None:
        rec = self.received_nonces().get(nonce_value)
        if rec is not None:
            rec.spent = True
            rec.task_digest = task_digest

    def dump_lines(self) -> List[str]:
        lines = []
        for recs in self.etokens.values():
            for rec in recs:
                lines.append(self._line("e", rec.nonce, rec.spent, rec.task_digest))
        for recs in self.vtokens.values():
            for rec in recs:
                lines.append(self._line("v", rec.nonce, rec.spent, rec.task_digest))
        return lines

    def _line(self, kind, nonce, spent, task_digest) -> str:
        row = {"owner": self.owner, "kind": kind, "nonce_hex": nonce.hex(), "spent": spent}
        if task_digest is not None:
            row["task_digest"] = task_digest.hex()
        return json.dumps(row, sort_keys=True)


@dataclass(frozen=True)
class IssueRecord:
    kind: str  # "e" | "v"
    nonce: Nonce
    pattern: Optional[TriplePattern]
    tuple_: Optional[Tuple[str, str, str]]
    holders: Tuple[str, ...]


class RaLedger:
    """The registration authority's private record of issued nonces."""

    def __init__(self):
        self.records: Dict[bytes, IssueRecord] = {}

    def add(self, record: IssueRecord) -> None:
        if record.nonce.value in self.records:
            raise ValueError("nonce issued twice")
        self.records[record.nonce.value] = record

    def __len__(self) -> int:
        return len(self.records)

    def get(self, nonce_value: bytes) -> Optional[IssueRecord]:
        return self.records.get(nonce_value)


def generate(
    plan: BudgetPlan,
    registry: ParticipantRegistry,
    ra: RaKeys,
    seed: bytes,
    public_keys: Dict[str, bytes],
    epoch: int = 0,
    declared_tuples: Optional[Sequence[Tuple[str, str, str]]] = None,
    tuple_cap: int = VTOKEN_TUPLE_CAP,
) -> Tuple[Dict[str, Wallet], RaLedger]:
    """Issue all wallets for one epoch; every nonce is recorded exactly once."""
    nonces = NonceFactory(seed, epoch)
    wallets = {pid: Wallet(pid) for pid in registry.all_ids()}
    ra_ledger = RaLedger()

    for pattern, count in plan.etokens:
        targets = pattern.targets()
        holder_ids = tuple(ident for _, ident in targets)
        for _ in range(count):
            nonce = nonces.next()
            ra_sig = sign(ra.sign.secret, token_pub_msg(nonce))
            ra_ledger.add(IssueRecord("e", nonce, pattern, None, holder_ids))
            for role, ident in targets:
                lam = tuple(
                    public_keys[other]
                    for r, other in targets
                    if other != ident or r != role
                )
                rec = ETokenRecord(pattern, nonce, ra_sig, lam)
                wallets[ident].etokens.setdefault(pattern, []).append(rec)

    if declared_tuples is not None:
        tuples = list(declared_tuples)
    else:
        total = len(registry.workers) * len(registry.platforms) * len(registry.requesters)
        if total > tuple_cap:
            raise ConfigError(
                f"{total} tuples exceed the v-token cap {tuple_cap}; "
                "declare the participant tuples explicitly"
            )
        tuples = list(registry.tuples())

    for tup in tuples:
        for _ in range(plan.theta_min):
            nonce = nonces.next()
            ra_sig = sign(ra.sign.secret, token_pub_msg(nonce))
            ra_ledger.add(IssueRecord("v", nonce, None, tup, tup))
            for owner in tup:
                priv = {
                    role: sign(ra.sign.secret, vpriv_msg(nonce, owner, role, element))
                    for role, element in zip(ROLES, tup)
                }
                rec = VTokenRecord(tup, nonce, ra_sig, owner, priv)
                wallets[owner].vtokens.setdefault(tup, []).append(rec)

    return wallets, ra_ledger


# --- spending ---


@dataclass(frozen=True)
class BundleEntry:
    """One token spend: public token part plus the six group signatures.

    The entry deliberately names no regulation and no participant. Group
    signatures come in (token, token||task) pairs for each of the worker,
    platform, and requester groups.
    """

    token_kind: str  # "e" | "v"
    nonce: Nonce
    ra_sig: bytes
    task_digest: bytes
    contribution_id: bytes
    request_sig: bytes
    group_sigs: Tuple[Tuple[str, str, GroupSig], ...]  # (group, "token"|"token_task", sig)

    def tau_pub(self) -> bytes:
        return tau_pub_bytes(self.nonce, self.ra_sig)

    def serialize(self) -> bytes:
        sig_parts = []
        for group, scope, gsig in self.group_sigs:
            sig_parts.append(
                enc_str(group) + enc_str(scope) + enc_bytes(gsig.outer) + enc_bytes(gsig.opening)
            )
        return b"".join(
            (
                enc_str(self.token_kind),
                token_pub_msg(self.nonce),
                enc_bytes(self.ra_sig),
                enc_bytes(self.task_digest),
                enc_bytes(self.contribution_id),
                enc_bytes(self.request_sig),
                enc_seq(sig_parts),
            )
        )


@dataclass(frozen=True)
class SpendBundle:
    """All token spends backing one crowdworking process."""

    task_id: str
    entries: Tuple[BundleEntry, ...]

    def nonces(self) -> List[bytes]:
        return [e.nonce.value for e in self.entries]

    def serialize(self) -> bytes:
        return enc_str(self.task_id) + enc_seq(e.serialize() for e in self.entries)


@dataclass(frozen=True)
class VerificationPayload:
    """The spend bundles of every contribution of one task."""

    task_id: str
    bundles: Tuple[SpendBundle, ...]

    def nonces(self) -> List[bytes]:
        out: List[bytes] = []
        for b in self.bundles:
            out.extend(b.nonces())
        return out

    def serialize(self) -> bytes:
        return enc_str(self.task_id) + enc_seq(b.serialize() for b in self.bundles)


@dataclass(frozen=True)
class ProcessContext:
    worker: str
    platform: str
    requester: str
    task_id: str
    task_digest: bytes

    def tuple_(self) -> Tuple[str, str, str]:
        return (self.worker, self.platform, self.requester)

    def by_role(self, role: str) -> str:
        return {"worker": self.worker, "platform": self.platform, "requester": self.requester}[role]


def spend(
    process: ProcessContext,
    applicable_regs: Sequence[Regulation],
    wallets: Dict[str, Wallet],
    ledger_view: Optional[LedgerView],
    creds: Dict[str, GroupCredential],
    platform_key: KeyPair,
    contrib_nonces: NonceFactory,
    refuse=None,
    stolen: Optional[Dict[str, ETokenRecord]] = None,
) -> SpendBundle:
    """Run the spend interaction for one process and assemble the bundle.

    For each applicable enforceable pattern the role-ordered first target
    holding an unspent token initiates; for verifiable regulations the
    platform spends one of its own v-tokens. All three participants co-sign
    every entry. `stolen` lets a scripted thief substitute a foreign token
    for a pattern (the relay attack); `refuse` lets a scripted participant
    decline to sign.
    """
    committed: Set[bytes] = set()
    if ledger_view is not None:
        committed = set(ledger_view.committed_nonces())

    contribution_id = contrib_nonces.next().value
    request_sig = sign(platform_key.secret, enc_bytes(process.task_digest) + enc_bytes(contribution_id))

    entries: List[BundleEntry] = []
    spends: List[Tuple[Nonce, str]] = []  # (nonce, kind) to mark after assembly

    e_patterns: List[TriplePattern] = []
    v_needed = False
    for reg in applicable_regs:
        if reg.kind == RegulationKind.ENFORCEABLE:
            if reg.pattern not in e_patterns:
                e_patterns.append(reg.pattern)
        else:
            v_needed = True

    for pattern in e_patterns:
        rec = stolen.get(pattern) if stolen else None
        if rec is None:
            for role, ident in pattern.targets():
                candidate = wallets[ident].unspent_etoken(pattern, committed)
                if candidate is not None:
                    rec = candidate
                    break
        if rec is None:
            raise BudgetExhaustedError(
                f"no unspent e-token for pattern {pattern.render()}; process must not proceed"
            )
        entries.append(
            _make_entry(
                "e", rec.nonce, rec.ra_sig, process, contribution_id, request_sig, creds, refuse
            )
        )
        spends.append((rec.nonce, "e"))
        rec.spent = True
        rec.task_digest = process.task_digest

    if v_needed:
        vrec = wallets[process.platform].unspent_vtoken(process.tuple_(), committed)
        if vrec is not None:
            entries.append(
                _make_entry(
                    "v", vrec.nonce, vrec.ra_sig, process, contribution_id, request_sig, creds, refuse
                )
            )
            spends.append((vrec.nonce, "v"))

    for nonce, _kind in spends:
        for participant in process.tuple_():
            wallets[participant].mark_spent(nonce.value, process.task_digest)

    transcript_sink = [process.worker, process.requester, process.platform]
    for nonce, _kind in spends:
        t = Transcript(
            platform=process.platform,
            task_id=process.task_id,
            task_digest=process.task_digest,
            contribution_id=contribution_id,
            nonce=nonce,
            request_sig=request_sig,
        )
        for participant in transcript_sink:
            wallets[participant].transcripts.append(t)

    return SpendBundle(task_id=process.task_id, entries=tuple(entries))


def _make_entry(
    kind: str,
    nonce: Nonce,
    ra_sig: bytes,
    process: ProcessContext,
    contribution_id: bytes,
    request_sig: bytes,
    creds: Dict[str, GroupCredential],
    refuse,
) -> BundleEntry:
    tau = tau_pub_bytes(nonce, ra_sig)
    bound = tau + enc_bytes(process.task_digest)
    sigs = []
    for role in ROLES:
        participant = process.by_role(role)
        if refuse is not None and refuse(participant, nonce):
            raise SignatureRefusedError(f"{participant} refused to sign nonce {nonce.hex()}")
        cred = creds[participant]
        sigs.append((ROLE_GROUP[role].value, "token", group_sign(cred, tau)))
        sigs.append((ROLE_GROUP[role].value, "token_task", group_sign(cred, bound)))
    return BundleEntry(
        token_kind=kind,
        nonce=nonce,
        ra_sig=ra_sig,
        task_digest=process.task_digest,
        contribution_id=contribution_id,
        request_sig=request_sig,
        group_sigs=tuple(sigs),
    )


# --- checking ---


class Verdict(str, Enum):
    VALID = "valid"
    FORGED = "forged"
    REPLAYED = "replayed"


@dataclass(frozen=True)
class CheckKeys:
    ra_sign_public: bytes
    group_publics: Dict[str, bytes]  # GroupId value -> group public key


def check(
    verification_tx: Transaction,
    ledger_views: Sequence[LedgerView],
    keys: CheckKeys,
    pending_nonces: Optional[Dict[bytes, bytes]] = None,
) -> Verdict:
    """Validation hook run during global consensus."""
    payload = verification_tx.bundle
    if verification_tx.kind != TxKind.VERIFICATION or payload is None:
        return Verdict.FORGED
    seen: Set[bytes] = set()
    for bundle in payload.bundles:
        for entry in bundle.entries:
            if not verify(keys.ra_sign_public, token_pub_msg(entry.nonce), entry.ra_sig):
                return Verdict.FORGED
            if entry.task_digest != verification_tx.parent_submission:
                return Verdict.FORGED
            tau = entry.tau_pub()
            bound = tau + enc_bytes(entry.task_digest)
            present = {(g, s) for g, s, _ in entry.group_sigs}
            for group in (GroupId.WORKERS, GroupId.PLATFORMS, GroupId.REQUESTERS):
                if (group.value, "token") not in present or (group.value, "token_task") not in present:
                    return Verdict.FORGED
            for group, scope, gsig in entry.group_sigs:
                message = tau if scope == "token" else bound
                if not group_verify(keys.group_publics[group], message, gsig):
                    return Verdict.FORGED
            if entry.nonce.value in seen:
                return Verdict.REPLAYED
            seen.add(entry.nonce.value)
    for view in ledger_views:
        committed = view.committed_nonces()
        for nonce_value in seen:
            owner_digest = committed.get(nonce_value)
            if owner_digest is not None and owner_digest != verification_tx.digest:
                return Verdict.REPLAYED
    if pending_nonces:
        for nonce_value in seen:
            holder = pending_nonces.get(nonce_value)
            if holder is not None and holder != verification_tx.digest:
                return Verdict.REPLAYED
    return Verdict.VALID


# --- alerts ---


class AlertKind(str, Enum):
    RELAY = "relay"
    REPLAY = "replay"
    FORGE = "forge"
    PLATFORM_FAILURE = "platform_failure"


@dataclass(frozen=True)
class AlertReport:
    reporter: str
    kind: AlertKind
    nonce: Optional[Nonce] = None
    entry: Optional[BundleEntry] = None
    tx_digest: Optional[bytes] = None
    platform: Optional[str] = None
    task_digest: Optional[bytes] = None
    transcripts: Tuple[Transcript, ...] = ()
    raised_tick: int = 0


def _committed_entries(views: Sequence[LedgerView]) -> List[Tuple[bytes, BundleEntry]]:
    """(tx digest, entry) pairs across views, deduplicated by tx digest."""
    seen: Set[bytes] = set()
    out: List[Tuple[bytes, BundleEntry]] = []
    for view in views:
        for d in view.order:
            block = view.blocks[d]
            if block.tx.kind != TxKind.VERIFICATION or d in seen:
                continue
            seen.add(d)
            payload = block.tx.bundle
            if payload is None:
                continue
            for bundle in payload.bundles:
                for entry in bundle.entries:
                    out.append((d, entry))
    return out


def scan_and_alert(
    participant: str,
    wallet: Wallet,
    ledger_views: Sequence[LedgerView],
    tick: int = 0,
) -> List[AlertReport]:
    """Relay detection: my nonce is on the ledger but I never spent it there."""
    alerts: List[AlertReport] = []
    mine = wallet.received_nonces()
    for tx_digest, entry in _committed_entries(ledger_views):
        rec = mine.get(entry.nonce.value)
        if rec is None:
            continue
        if not rec.spent or rec.task_digest != entry.task_digest:
            alerts.append(
                AlertReport(
                    reporter=participant,
                    kind=AlertKind.RELAY,
                    nonce=entry.nonce,
                    entry=entry,
                    tx_digest=tx_digest,
                    task_digest=entry.task_digest,
                    raised_tick=tick,
                )
            )
    return alerts


def scan_platform_failure(
    participant: str,
    wallet: Wallet,
    ledger_views: Sequence[LedgerView],
    platform_public_keys: Dict[str, bytes],
    tick: int = 0,
) -> List[AlertReport]:
    """Alert on signed spend requests whose tokens never reached the ledger."""
    committed = {entry.nonce.value for _, entry in _committed_entries(ledger_views)}
    by_platform: Dict[Tuple[str, bytes], List[Transcript]] = {}
    for t in wallet.transcripts:
        by_platform.setdefault((t.platform, t.task_digest), []).append(t)
    alerts = []
    for (platform, task_digest), transcripts in by_platform.items():
        missing = [t for t in transcripts if t.nonce.value not in committed]
        if missing:
            alerts.append(
                AlertReport(
                    reporter=participant,
                    kind=AlertKind.PLATFORM_FAILURE,
                    platform=platform,
                    task_digest=task_digest,
                    transcripts=tuple(transcripts),
                    raised_tick=tick,
                )
            )
    return alerts


class VerdictKind(str, Enum):
    TRUE_POSITIVE = "true_positive"
    FALSE_POSITIVE = "false_positive"


@dataclass(frozen=True)
class AdjudicationVerdict:
    kind: VerdictKind
    subject: str  # culprit on true positive, reporter on false positive
    detail: str


def adjudicate(
    ra: RaKeys,
    alert: AlertReport,
    ledger_views: Sequence[LedgerView],
    registry: ParticipantRegistry,
    ra_ledger: RaLedger,
    public_keys: Dict[str, bytes],
    timeout_expired: bool = True,
) -> AdjudicationVerdict:
    """Open the evidence and rule for or against the reporter."""
    if alert.kind == AlertKind.RELAY:
        return _adjudicate_relay(ra, alert, ledger_views, registry, ra_ledger)
    if alert.kind == AlertKind.PLATFORM_FAILURE:
        return _adjudicate_platform_failure(alert, ledger_views, public_keys, timeout_expired)
    raise MalformedEvidenceError(f"no adjudication path for {alert.kind.value}")


def _adjudicate_relay(ra, alert, ledger_views, registry, ra_ledger) -> AdjudicationVerdict:
    if alert.nonce is None or alert.entry is None:
        raise MalformedEvidenceError("relay alert must carry the on-ledger entry")
    on_ledger = [
        e for _, e in _committed_entries(ledger_views) if e.nonce.value == alert.nonce.value
    ]
    if not on_ledger or on_ledger[0] != alert.entry:
        raise MalformedEvidenceError("evidence entry does not match the ledger")
    issue = ra_ledger.get(alert.nonce.value)
    if issue is None:
        raise MalformedEvidenceError("nonce was never issued")
    if alert.reporter not in issue.holders:
        raise MalformedEvidenceError("reporter never held this token")
    role = registry.role_of(alert.reporter)
    group = ROLE_GROUP[role]
    entry = alert.entry
    bound = entry.tau_pub() + enc_bytes(entry.task_digest)
    gsig = next(
        (s for g, scope, s in entry.group_sigs if g == group.value and scope == "token_task"),
        None,
    )
    if gsig is None:
        raise MalformedEvidenceError("entry carries no task-bound signature for the group")
    opened = group_open(ra, gsig, bound)
    legit = next((h for h in issue.holders if registry.role_of(h) == role), None)
    if opened != legit:
        return AdjudicationVerdict(
            VerdictKind.TRUE_POSITIVE,
            opened,
            f"{group.value} signature opens to {opened}, legitimate holder is {legit}",
        )
    return AdjudicationVerdict(
        VerdictKind.FALSE_POSITIVE,
        alert.reporter,
        f"{group.value} signature opens to the legitimate holder {legit}",
    )


def _adjudicate_platform_failure(
    alert, ledger_views, public_keys, timeout_expired
) -> AdjudicationVerdict:
    if not alert.transcripts or alert.platform is None:
        raise MalformedEvidenceError("platform-failure alert must carry signed requests")
    if not timeout_expired:
        raise MalformedEvidenceError("adjudication runs only after the timeout expires")
    platform_public = public_keys.get(alert.platform)
    if platform_public is None:
        raise MalformedEvidenceError(f"unknown platform {alert.platform}")
    for t in alert.transcripts:
        message = enc_bytes(t.task_digest) + enc_bytes(t.contribution_id)
        if not verify(platform_public, message, t.request_sig):
            raise MalformedEvidenceError("request transcript signature does not verify")
    requested = {t.nonce.value for t in alert.transcripts}
    committed = {e.nonce.value for _, e in _committed_entries(ledger_views)}
    missing = requested - committed
    if missing:
        return AdjudicationVerdict(
            VerdictKind.TRUE_POSITIVE,
            alert.platform,
            f"{len(missing)} requested token(s) never committed after timeout",
        )
    return AdjudicationVerdict(
        VerdictKind.FALSE_POSITIVE,
        alert.reporter,
        "all requested tokens are committed; platform was slow but correct",
    )


# --- proofs ---


@dataclass(frozen=True)
class ProofComponent:
    nonce: Nonce
    owner: str
    bindings: Tuple[Tuple[str, str, bytes], ...]  # (role, element, RA signature)


@dataclass(frozen=True)
class Proof:
    regulation: Regulation
    prover: str
    components: Tuple[ProofComponent, ...]


def prove(
    participant: str,
    reg: Regulation,
    wallet: Wallet,
    ledger_views: Sequence[LedgerView],
) -> Proof:
    """Assemble threshold+1 committed v-token components, minimally disclosed."""
    if reg.kind != RegulationKind.VERIFIABLE:
        raise InsufficientEvidenceError("proofs apply to verifiable regulations only")
    needed = reg.threshold + 1
    committed: Set[bytes] = set()
    for view in ledger_views:
        committed.update(view.committed_nonces())
    target_roles = reg.pattern.targets()
    candidates = []
    for tup, recs in sorted(wallet.vtokens.items()):
        if not reg.pattern.matches(tup):
            continue
        for rec in recs:
            if rec.spent and rec.nonce.value in committed:
                candidates.append(rec)
    candidates.sort(key=lambda r: r.nonce.value)
    if len(candidates) < needed:
        raise InsufficientEvidenceError(
            f"{len(candidates)} qualifying committed v-tokens, need {needed}"
        )
    components = []
    for rec in candidates[:needed]:
        bindings = tuple((role, element, rec.priv[role]) for role, element in target_roles)
        components.append(ProofComponent(nonce=rec.nonce, owner=rec.owner, bindings=bindings))
    return Proof(regulation=reg, prover=participant, components=tuple(components))


def verify_proof(
    proof: Proof,
    ledger_views: Sequence[LedgerView],
    ra_sign_public: bytes,
) -> bool:
    """Check RA bindings, ledger commitment on every view, and distinctness."""
    reg = proof.regulation
    if reg.kind != RegulationKind.VERIFIABLE:
        return False
    if len(proof.components) < reg.threshold + 1:
        return False
    nonce_values = [c.nonce.value for c in proof.components]
    if len(set(nonce_values)) != len(nonce_values):
        return False
    expected = dict(reg.pattern.targets())
    if not ledger_views:
        return False
    per_view = [set(view.committed_nonces()) for view in ledger_views]
    for comp in proof.components:
        if comp.owner != proof.prover:
            return False
        got_roles = {role for role, _, _ in comp.bindings}
        if got_roles != set(expected):
            return False
        for role, element, sig in comp.bindings:
            if expected.get(role) != element:
                return False
            if not verify(ra_sign_public, vpriv_msg(comp.nonce, comp.owner, role, element), sig):
                return False
        if any(comp.nonce.value not in nonces for nonces in per_view):
            return False
    return True


def dump_wallets(wallets: Dict[str, Wallet]) -> List[str]:
    lines: List[str] = []
    for owner in sorted(wallets):
        lines.extend(wallets[owner].dump_lines())
    return lines
