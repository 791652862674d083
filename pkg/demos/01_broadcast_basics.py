"""Walk one broadcast instance by hand.

Four nodes, node 0 is the designated sender.  We play postman ourselves so
every state transition is visible: INIT fans out, echoes accumulate, a
quorum of echoes turns into READY votes, a quorum of READY votes completes.
Then the probe interface: abort-before-quorum vs adopt-after-quorum.
"""

from bbca_chain.bbca import BbcaInstance, InstanceId, MsgKind
from bbca_chain.identity import SystemParams

params = SystemParams(4)
bid = InstanceId(sender=0, view=1)
nodes = {i: BbcaInstance(params, bid, i) for i in range(4)}

print(f"n={params.n}, f={params.f}, quorum={params.quorum}")
print()

# The sender broadcasts: an INIT plus its own signed echo.
outbox = [(0, msg) for msg in nodes[0].broadcast(b"block bytes")]
print("sender emits:", ", ".join(m.kind.name for _, m in outbox))

delivered = 0
while outbox:
    frm, msg = outbox.pop(0)
    for i, node in nodes.items():
        if msg.kind == MsgKind.INIT:
            outs = node.on_init(msg.message, frm)
        elif msg.kind == MsgKind.ECHO:
            outs = node.on_echo(msg.message, msg.sig, frm)
        else:
            event = node.on_ready(msg.message, msg.sig, frm)
            outs = []
            if event is not None:
                print(f"node {i} completes with a "
                      f"{len(event.cert.sigs)}-signature certificate")
        outbox.extend((i, out) for out in outs)
        delivered += 1

print(f"{delivered} deliveries; every node completed:",
      all(n.completed is not None for n in nodes.values()))
print()

# Probing. A fresh instance has nothing to adopt: the probe aborts it, and
# the abort is a promise to never send READY afterwards.
fresh = BbcaInstance(params, InstanceId(0, 2), 3)
print("fresh instance probe:", "adopt" if fresh.probe().adopted else "noadopt",
      "| abort flag:", fresh.abort)

# Echo recording continues after the abort, so a later probe can upgrade.
sender = BbcaInstance(params, InstanceId(0, 2), 0)
for msg in sender.broadcast(b"late block"):
    if msg.kind == MsgKind.ECHO:
        fresh.on_echo(msg.message, msg.sig, 0)
for signer in (1, 2):
    helper = BbcaInstance(params, InstanceId(0, 2), signer)
    echo = helper.on_init(b"late block", 0)[0]
    fresh.on_echo(echo.message, echo.sig, signer)
result = fresh.probe()
print("after a quorum of echoes, the same instance probes:",
      "adopt" if result.adopted else "noadopt")
print("but the suppressed READY stays suppressed:", not fresh.ready)
