import pytest

from bbca_chain.bbca import BbcaMsg, InstanceId, MsgKind
from bbca_chain.blocks import (
    CertKind,
    EvidenceKind,
    GENESIS_CERT,
    GENESIS_NEW_VIEW,
    Justification,
    JustificationKind,
    make_backbone,
)
from bbca_chain.chain import (
    NO_OP,
    BlockMsg,
    Broadcast,
    ChainNode,
    SafetyViolation,
    SetTimer,
    get_proposer,
    make_predicate,
    validate_backbone_block,
    validate_new_view_block,
)
from conftest import (
    make_adopt_nvb,
    make_cert,
    make_complete_chain,
    make_complete_nvb,
    make_noadopt_nvb,
)


def broadcasts(node):
    return [a.msg for a in node.take_outbox() if isinstance(a, Broadcast)]


# -- leader rotation -----------------------------------------------------------

def test_round_robin_rotation(params4):
    assert get_proposer(1, params4) == 1
    assert get_proposer(4, params4) == 0
    assert get_proposer(5, params4) == 1


def test_rotation_rejects_view_zero(params4):
    with pytest.raises(ValueError):
        get_proposer(0, params4)


# -- validation -----------------------------------------------------------------

def test_validate_genesis_new_view(params4):
    assert validate_new_view_block(GENESIS_NEW_VIEW, params4)


def test_validate_complete_new_view(params4):
    blocks, _ = make_complete_chain(params4, 1)
    nvb = make_complete_nvb(params4, 2, 1, blocks[1])
    assert validate_new_view_block(nvb, params4)


def test_validate_rejects_view_mismatch(params4):
    # A real view-1 certificate wrapped in a new-view block labeled view 2.
    from bbca_chain.blocks import NewViewData, make_new_view
    blocks, certs = make_complete_chain(params4, 1)
    mismatched = make_new_view(
        2, 2, NewViewData(EvidenceKind.COMPLETE, certs[1]))
    assert not validate_new_view_block(mismatched, params4)


def test_validate_noadopt_new_view(params4):
    nvb = make_noadopt_nvb(params4, 2, 1, GENESIS_CERT)
    assert validate_new_view_block(nvb, params4)


def test_validate_noadopt_rejects_foreign_signature(params4):
    nvb = make_noadopt_nvb(params4, 2, 1, GENESIS_CERT)
    forged = make_noadopt_nvb(params4, 2, 1, GENESIS_CERT)
    hacked = forged.new_view.noadopt_sig
    import dataclasses
    wrong_author = dataclasses.replace(
        nvb, author=3)  # signature no longer matches the author
    assert not validate_new_view_block(wrong_author, params4)


def test_predicate_accepts_wellformed_proposal(params4):
    blocks, _ = make_complete_chain(params4, 1)
    predicate = make_predicate(1, params4)
    assert predicate(blocks[1].encoded)
    assert not predicate(b"garbage")


def test_predicate_rejects_wrong_proposer(params4):
    wrong = make_backbone(2, 1, Justification(JustificationKind.COMPLETE,
                                              (GENESIS_NEW_VIEW,)))
    assert not validate_backbone_block(wrong, params4)


def test_predicate_rejects_short_noadopt_quorum(params4):
    nvbs = tuple(make_noadopt_nvb(params4, author, 1, GENESIS_CERT)
                 for author in (0, 2))  # only 2f of them
    block = make_backbone(2, 2, Justification(JustificationKind.NOADOPT, nvbs))
    assert not validate_backbone_block(block, params4)


def test_predicate_rejects_duplicate_noadopt_authors(params4):
    one = make_noadopt_nvb(params4, 2, 1, GENESIS_CERT)
    other = make_noadopt_nvb(params4, 2, 1, GENESIS_CERT, extra_refs=(
        GENESIS_NEW_VIEW.digest,))
    block = make_backbone(
        2, 2, Justification(JustificationKind.NOADOPT,
                            (one, other,
                             make_noadopt_nvb(params4, 0, 1, GENESIS_CERT))))
    assert not validate_backbone_block(block, params4)


# -- node behavior ----------------------------------------------------------------

def test_leader_proposes_at_startup(params4):
    leader = ChainNode(1, params4)
    leader.start()
    msgs = broadcasts(leader)
    kinds = [m.kind for m in msgs if isinstance(m, BbcaMsg)]
    assert kinds == [MsgKind.INIT, MsgKind.ECHO]
    assert leader.view == 1 and 1 in leader.proposed


def test_non_leader_only_arms_timer(params4):
    node = ChainNode(0, params4)
    node.start()
    actions = node.take_outbox()
    assert any(isinstance(a, SetTimer) and a.view == 1 for a in actions)
    assert not [a for a in actions if isinstance(a, Broadcast)]


def test_timeout_probes_and_waits_for_quorum(params4):
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    node.handle_timer(1)
    msgs = broadcasts(node)
    assert len(msgs) == 1 and isinstance(msgs[0], BlockMsg)
    nvb = msgs[0].block
    assert nvb.new_view.evidence == EvidenceKind.NOADOPT
    assert nvb.new_view.cert == GENESIS_CERT  # anchor bottoms out at genesis
    assert node.view == 1  # two more noadopt blocks are still needed
    for author in (2, 3):
        node.handle_message(author, BlockMsg(
            make_noadopt_nvb(params4, author, 1, GENESIS_CERT)))
    assert node.view == 2


def test_early_probe_after_f_plus_one_noadopts(params4):
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    node.handle_message(2, BlockMsg(
        make_noadopt_nvb(params4, 2, 1, GENESIS_CERT)))
    assert node.view == 1 and 1 not in node.probed
    node.handle_message(3, BlockMsg(
        make_noadopt_nvb(params4, 3, 1, GENESIS_CERT)))
    # f+1 distinct noadopts: the node probes without waiting for its timer,
    # publishes its own noadopt block, and the quorum completes the view.
    assert 1 in node.probed
    assert node.view == 2


def test_received_complete_new_view_advances_and_rebroadcasts(params4):
    blocks, _ = make_complete_chain(params4, 1)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    node.handle_message(1, BbcaMsg(MsgKind.INIT, InstanceId(1, 1),
                                   blocks[1].encoded))
    node.take_outbox()
    nvb = make_complete_nvb(params4, 3, 1, blocks[1])
    node.handle_message(3, BlockMsg(nvb))
    assert node.view == 2
    assert node.last_committed == 1
    sent = broadcasts(node)
    own = [m.block for m in sent if isinstance(m, BlockMsg)
           and m.block.kind.name == "NEW_VIEW"]
    assert own and own[0].author == 0
    assert own[0].new_view.evidence == EvidenceKind.COMPLETE


def test_jump_over_views_on_higher_evidence(params4):
    blocks, _ = make_complete_chain(params4, 3)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    for view in (1, 2, 3):
        node.handle_message(1, BbcaMsg(
            MsgKind.INIT, InstanceId(get_proposer(view, params4), view),
            blocks[view].encoded))
    nvb = make_complete_nvb(params4, 3, 3, blocks[3])
    node.handle_message(3, BlockMsg(nvb))
    assert node.view == 4
    assert node.last_committed == 3
    assert [node.finalized[v].digest for v in (1, 2, 3)] == [
        blocks[v].digest for v in (1, 2, 3)]


def test_adopt_evidence_advances_without_commit(params4):
    blocks, _ = make_complete_chain(params4, 1)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    node.handle_message(1, BbcaMsg(MsgKind.INIT, InstanceId(1, 1),
                                   blocks[1].encoded))
    node.handle_message(3, BlockMsg(make_adopt_nvb(params4, 3, 1, blocks[1])))
    assert node.view == 2
    assert node.last_committed == 0  # adoption alone never commits


def test_stale_completion_commits_without_view_change(params4):
    blocks, certs = make_complete_chain(params4, 1)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    # Timeout path pushes the node into view 2 first.
    node.handle_timer(1)
    for author in (2, 3):
        node.handle_message(author, BlockMsg(
            make_noadopt_nvb(params4, author, 1, GENESIS_CERT)))
    assert node.view == 2
    node.take_outbox()
    # The view-1 proposal and its ready quorum arrive afterwards.
    node.handle_message(1, BbcaMsg(MsgKind.INIT, InstanceId(1, 1),
                                   blocks[1].encoded))
    from bbca_chain.encoding import ready_statement
    from bbca_chain.identity import sign
    for signer in (1, 2, 3):
        sig = sign(signer, ready_statement(1, 1, blocks[1].digest))
        node.handle_message(signer, BbcaMsg(MsgKind.READY, InstanceId(1, 1),
                                            blocks[1].encoded, sig))
    assert node.last_committed == 1
    assert node.view == 2  # no regression, no second new-view block
    sent = [m for m in broadcasts(node) if isinstance(m, BlockMsg)
            and m.block.kind.name == "NEW_VIEW"]
    assert not sent


# -- finalize / commit --------------------------------------------------------------

def test_finalize_recursion_on_complete_chain(params4):
    blocks, _ = make_complete_chain(params4, 2)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    for view in (1, 2):
        node._ingest_block(blocks[view])
    node.try_commit(blocks[2])
    assert node.finalized[1].digest == blocks[1].digest
    assert node.finalized[2].digest == blocks[2].digest
    assert node.last_committed == 2


def test_finalize_marks_noop_for_skipped_views(params4):
    blocks, certs = make_complete_chain(params4, 1)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    node._ingest_block(blocks[1])
    # Views 2 and 3 produce nothing; view 4's proposal is justified by a
    # noadopt quorum for view 3 anchored at view 1's certificate.
    anchor = make_cert(params4, CertKind.COMPLETE, 1, blocks[1])
    noadopts = tuple(make_noadopt_nvb(params4, author, 3, anchor)
                     for author in (0, 1, 2))
    b4 = make_backbone(0, 4, Justification(JustificationKind.NOADOPT, noadopts))
    node._ingest_block(b4)
    node.try_commit(b4)
    assert node.finalized[2] is NO_OP
    assert node.finalized[3] is NO_OP
    assert node.finalized[1].digest == blocks[1].digest
    assert node.last_committed == 4
    committed_kinds = [node.dag.get(r).view for r in node.committed_log]
    assert committed_kinds == sorted(committed_kinds)


def test_conflicting_finalization_raises(params4):
    blocks, _ = make_complete_chain(params4, 1)
    twin = make_backbone(1, 1, Justification(JustificationKind.COMPLETE,
                                             (GENESIS_NEW_VIEW,)),
                         payload=b"twin")
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    node._ingest_block(blocks[1])
    node._ingest_block(twin)
    node.try_commit(blocks[1])
    with pytest.raises(SafetyViolation):
        node.try_commit(twin)


def test_commit_contiguity_over_a_gap(params4):
    blocks, _ = make_complete_chain(params4, 3)
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    # View 3's proposal arrives before view 2's; its embedded evidence for
    # view 2 stays buffered until the missing block shows up.
    node._ingest_block(blocks[1])
    node._ingest_block(blocks[3])
    node.try_commit(blocks[1])
    assert node.last_committed == 1
    # Delivering view 2's block releases the buffered evidence: 2 commits.
    node._ingest_block(blocks[2])
    assert node.last_committed == 2
    newly = node.try_commit(blocks[3])
    assert newly == [3]
    assert node.last_committed == 3


# -- payload submission ----------------------------------------------------------

def test_submit_payload_builds_connected_data_block(params4):
    node = ChainNode(0, params4)
    node.start()
    node.take_outbox()
    block = node.submit_payload(b"tx")
    assert block.refs  # always referenced into the existing DAG
    assert node.my_last_ref == block.digest
    second = node.submit_payload(b"tx2")
    assert block.digest in second.refs
