"""
detectors.ccra - Cross-chain replay attacks: signatures whose digest does not bind the chain.

A recovered signer is replayable on another chain when the signed digest
neither reads `block.chainid` at call time nor comes from a separator the
constructor built from it. A chain id that is hardcoded, or stored in a
variable that can be rewritten after deployment, is reported as well.
"""

import logging
import re
from typing import List, Optional, Set

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.models import Candidate, Finding
from equiv_guard.ingest.models import AstKind, AstNode, CompilationArtifact
from equiv_guard.ipdg.models import CallSite, Ipdg, IpdgNode, StmtKind
from equiv_guard.ipdg.queries import call_sites, data_closure, writable_outside_constructor
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings
from equiv_guard.symexec.verifier import CALLER_PERMISSION, CHAINID_SOLVABLE, TIMESTAMP_RESTRICTION
from equiv_guard.taint.models import (
    SanitizerKind,
    SanitizerPattern,
    SinkKind,
    SinkPattern,
    SourceKind,
    SourcePattern,
    TaintPath,
    TaintSpec,
)
from equiv_guard.taint.patterns import SanitizerChecker

logger = logging.getLogger(__name__)

RECOVERY_CALLS = frozenset({"ecrecover", "recover", "tryRecover"})
CHAIN_ENV = frozenset({"block.chainid"})
DOMAIN_PREFIX = "EIP712Domain("
CHAIN_FIELD = "chainid"

CALL_TIME = SanitizerPattern(id="call-time-chainid", kind=SanitizerKind.ENV_DEPENDENCE, env=CHAIN_ENV)
CHAIN_GUARD = SanitizerPattern(id="chainid-guard", kind=SanitizerKind.GUARDED_BY_ENV, env=CHAIN_ENV)

# staticcall(gas, 0x01, ...) is the ecrecover precompile
_ASSEMBLY_RECOVER = re.compile(r"ecrecover|staticcall\(\s*[^,()]+(?:\([^)]*\))?\s*,\s*(?:0x0*1|1)\s*,")


def ccra_spec(sinks: Set[int]) -> TaintSpec:
    return TaintSpec(
        smell=Smell.CCRA,
        sources=(SourcePattern(kind=SourceKind.EXTERNAL_PARAMETER),),
        sinks=(SinkPattern(kind=SinkKind.NODES, nodes=frozenset(sinks)),),
        sanitizers=(CALL_TIME, CHAIN_GUARD),
    )


def _domain_fields(text: str) -> List[str]:
    """Field names of an `EIP712Domain(...)` type string, in order."""
    inner = text[len(DOMAIN_PREFIX):].rstrip(")")
    return [part.strip().split()[-1] for part in inner.split(",") if part.strip()]


class _CcraScan:
    def __init__(self, ctx: DetectionContext):
        self.ctx = ctx
        self.ipdg = ctx.ipdg
        self.terms = ctx.terms
        self.checker = SanitizerChecker(ctx.ipdg, ctx.settings.taint_depth_bound)

    def sinks(self) -> List[tuple]:
        found = call_sites(self.ipdg, lambda c: c.name in RECOVERY_CALLS)
        outside = [(n, c) for n, c in found if not self.ctx.in_library(n)]
        return outside or found

    # --- Domain separator inspection ---

    def _type_string(self, expr: AstNode) -> Optional[str]:
        for n in expr.walk():
            if n.kind == AstKind.LITERAL and str(n.attr("value") or "").startswith(DOMAIN_PREFIX):
                return n.attr("value")
            name = self.terms.state_var(n) if n.kind == AstKind.IDENTIFIER else None
            if name is not None:
                decl = self.ipdg.nodes[self.ipdg.state_vars[name]].ast
                init = decl.child("init") if decl is not None else None
                if init is not None:
                    found = self._type_string(init)
                    if found is not None:
                        return found
        return None

    def _chain_arguments(self, node: IpdgNode) -> List[AstNode]:
        """Arguments of `abi.encode(TYPEHASH, ...)` that fill the chainId field."""
        found = []
        if node.ast is None:
            return found
        for call in node.ast.find(AstKind.FUNCTION_CALL):
            callee = call.child("callee")
            if callee is None or callee.kind != AstKind.MEMBER_ACCESS or callee.attr("member_name") != "encode":
                continue
            args = call.children_with("arg")
            for i, arg in enumerate(args):
                text = self._type_string(arg)
                if text is None:
                    continue
                fields = [f.lower() for f in _domain_fields(text)]
                if CHAIN_FIELD in fields and i + 1 + fields.index(CHAIN_FIELD) < len(args):
                    found.append(args[i + 1 + fields.index(CHAIN_FIELD)])
                break
        return found

    def hardcoded_chainid(self, closure: Set[int]) -> Optional[int]:
        for nid in sorted(closure):
            node = self.ipdg.nodes[nid]
            for arg in self._chain_arguments(node):
                value = self.terms.constant(self.terms.resolve(node, arg))
                if value is not None:
                    return value
        return None

    def _constructor_derives_chain(self, name: str) -> bool:
        """Whether the initializer or a constructor write of `name` depends on block.chainid."""
        for node in self.ipdg.nodes.values():
            if name not in node.writes:
                continue
            info = self.ipdg.functions.get(node.function_key)
            at_deploy = node.stmt_kind == StmtKind.STATE_VAR_DECL or (info is not None and info.is_constructor)
            if at_deploy and self.checker.env_closure(node.id) & CHAIN_ENV:
                return True
        return False

    def mutable_chain_variable(self, closure: Set[int]) -> Optional[str]:
        """A state variable holding the chain binding that a non-constructor function can overwrite."""
        for nid in sorted(closure):
            node = self.ipdg.nodes[nid]
            for name in sorted(node.reads):
                if name not in self.ipdg.state_vars or not writable_outside_constructor(self.ipdg, name):
                    continue
                if CHAIN_FIELD in name.rsplit(".", 1)[-1].lower() or self._constructor_derives_chain(name):
                    return name
        return None

    def reads_chain_at_call_time(self, closure: Set[int]) -> bool:
        for nid in closure:
            node = self.ipdg.nodes[nid]
            info = self.ipdg.functions.get(node.function_key)
            if node.env_reads & CHAIN_ENV and (info is None or not info.is_constructor):
                return True
        return False

    # --- Candidates ---

    def candidate(self, node: IpdgNode, call: CallSite, suspicious: bool,
                  witness: Optional[TaintPath]) -> Optional[Candidate]:
        closure = data_closure(self.ipdg, node.id, self.ctx.settings.taint_depth_bound)
        sanitize = self.ctx.mode.sanitizers
        if sanitize and self.checker.hit(CHAIN_GUARD, [node.id]) is not None:
            return None
        metadata = {}
        hardcoded = self.hardcoded_chainid(closure)
        if hardcoded is not None:
            metadata["hardcoded_chainid"] = hardcoded
        variable = self.mutable_chain_variable(closure)
        if variable is not None:
            metadata["chainid_variable"] = variable
        if sanitize and variable is None and self.reads_chain_at_call_time(closure):
            return None
        if not metadata and not suspicious:
            return None
        if hardcoded is not None:
            message = f"signature digest binds hardcoded chain id {hardcoded}"
        elif variable is not None:
            message = f"signature digest binds chain id from {variable}, writable after deployment"
        else:
            message = f"{call.name}() digest does not depend on block.chainid; signature replayable across chains"
        return Candidate(
            smell=Smell.CCRA, function_key=node.function_key, node=node.id, location=call.src,
            witness=witness, message=message, metadata=metadata,
            checks=(CHAINID_SOLVABLE, TIMESTAMP_RESTRICTION, CALLER_PERMISSION), required=(CHAINID_SOLVABLE,),
        )

    def assembly_recovery(self) -> None:
        for node in self.ipdg.nodes.values():
            if not node.opaque:
                continue
            unit = self.ctx.artifact.sources.get(node.src.file_index)
            if unit is None:
                continue
            text = unit.content.encode("utf-8")[node.src.start:node.src.end].decode("utf-8", errors="ignore")
            if _ASSEMBLY_RECOVER.search(text):
                self.ctx.diagnose("assembly-ecrecover",
                                  f"signature recovery inside inline assembly in {node.function} is not analysed",
                                  node.src)


def find_ccra(ctx: DetectionContext) -> List[Candidate]:
    scan = _CcraScan(ctx)
    scan.assembly_recovery()
    sinks = scan.sinks()
    if not sinks:
        return []
    paths = ctx.taint(ccra_spec({n.id for n, _ in sinks}))
    candidates = []
    seen = set()
    for node, call in sinks:
        if (node.id, call.src) in seen:
            continue
        seen.add((node.id, call.src))
        reaching = sorted((p for p in paths if p.sink == node.id),
                          key=lambda p: (not p.suspicious, p.low_confidence, len(p.nodes)))
        suspicious = any(p.suspicious for p in reaching)
        witness = reaching[0] if reaching else None
        found = scan.candidate(node, call, suspicious, witness)
        if found is not None:
            candidates.append(found)
    logger.debug("%s: %d CCRA candidates from %d recovery calls", ctx.contract, len(candidates), len(sinks))
    return candidates


def detect_ccra(artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg],
               settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    """Flag signature recoveries whose digest is not bound to the executing chain."""
    return run_detector(find_ccra, artifact, ipdg, cfg, settings)
