"""
ipdg.builder - Builds the statement-level dependency graph from normalized ASTs.

One node per statement, plus an Entry and an Exit node per function and one
node per state-variable declaration. Edges:

  Control  Entry -> top-level statements, If/Loop -> their bodies,
           Require -> the statements after it in the same block.
  Data     reaching definitions inside a function for locals and parameters;
           every writer to every reader for state variables.
  Call     call site -> callee Entry, or -> the ExternalSink node.
  Return   callee Exit -> call site.

Modifiers are inlined where they are invoked and overridden functions resolve
to the most-derived body of the contract being built.
"""

import logging
from collections import deque
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

from equiv_guard.ingest.models import AstKind, AstNode, CompilationArtifact, LOOP_KINDS
from equiv_guard.ipdg.models import (
    EXTERNAL_SINK,
    GLOBAL_FUNCTION,
    CallKind,
    CallSite,
    EdgeKind,
    FunctionInfo,
    Ipdg,
    IpdgNode,
    LiteralFact,
    StmtKind,
    VariableInfo,
    VariableKind,
)
from equiv_guard.ipdg.queries import constants_of
from equiv_guard.models import Diagnostic, SourceRange

logger = logging.getLogger(__name__)

ENV_MEMBERS: Dict[Tuple[str, str], str] = {
    ("block", "number"): "block.number",
    ("block", "timestamp"): "block.timestamp",
    ("block", "chainid"): "block.chainid",
    ("block", "coinbase"): "block.coinbase",
    ("block", "difficulty"): "block.difficulty",
    ("block", "prevrandao"): "block.prevrandao",
    ("block", "basefee"): "block.basefee",
    ("block", "gaslimit"): "block.gaslimit",
    ("msg", "sender"): "msg.sender",
    ("msg", "value"): "msg.value",
    ("msg", "data"): "msg.data",
    ("msg", "sig"): "msg.sig",
    ("tx", "origin"): "tx.origin",
    ("tx", "gasprice"): "tx.gasprice",
}
ENV_IDENTIFIERS = {"now": "block.timestamp"}
INTRINSICS = frozenset({
    "ecrecover", "keccak256", "sha3", "sha256", "ripemd160", "addmod", "mulmod",
    "blockhash", "selfdestruct", "suicide",
})
TERMINATING_CALLS = frozenset({"revert", "selfdestruct", "suicide"})
PURE_BASES = frozenset({"abi", "string", "bytes", "type"})
LOW_LEVEL = frozenset({"call", "delegatecall", "staticcall", "callcode"})

Flow = nx.DiGraph


def _contract_name(container: AstNode) -> str:
    return container.name or "<file>"


def _params(fn: AstNode, role: str = "params") -> List[AstNode]:
    plist = fn.child(role)
    return plist.children_with("param") if plist is not None else []


def function_key(container: AstNode, fn: AstNode) -> str:
    types = ",".join(p.attr("type_string", "") for p in _params(fn))
    return f"{_contract_name(container)}.{fn.name}({types})"


class _UnitIndex:
    """Declarations of one compiler run, by solc node id."""

    def __init__(self, units: List[AstNode]):
        self.units = units
        self.contracts: Dict[int, AstNode] = {}
        self.functions: Dict[int, Tuple[AstNode, AstNode]] = {}
        self.modifiers: Dict[int, Tuple[AstNode, AstNode]] = {}
        self.variables: Dict[int, AstNode] = {}
        self.file_constants: List[Tuple[AstNode, AstNode]] = []
        for unit in units:
            members = [unit] if unit.kind == AstKind.CONTRACT else unit.children_with("member")
            for member in members:
                if member.kind == AstKind.CONTRACT:
                    self.contracts[member.node_id] = member
                    for item in member.children_with("member"):
                        if item.kind == AstKind.FUNCTION:
                            self.functions[item.node_id] = (member, item)
                        elif item.kind == AstKind.MODIFIER:
                            self.modifiers[item.node_id] = (member, item)
                elif member.kind == AstKind.FUNCTION:
                    self.functions[member.node_id] = (unit, member)
                elif member.kind == AstKind.VARIABLE:
                    self.file_constants.append((unit, member))
            for node in unit.walk():
                if node.kind == AstKind.VARIABLE:
                    self.variables[node.node_id] = node

    def is_library(self, container: AstNode) -> bool:
        return container.kind == AstKind.CONTRACT and container.attr("contract_kind") == "library"


class _Scope:
    """The contract being built: its linearization, most-derived first."""

    def __init__(self, index: _UnitIndex, contract: AstNode):
        self.index = index
        self.contract = contract
        ids = contract.attr("linearized_base_contracts") or [contract.node_id]
        self.linearization = [index.contracts[i] for i in ids if i in index.contracts] or [contract]
        self.linear_ids = {c.node_id for c in self.linearization}

    def inherits(self, container: AstNode) -> bool:
        return container.kind == AstKind.CONTRACT and container.node_id in self.linear_ids

    def most_derived(self, fn: AstNode) -> AstNode:
        """Override of `fn` in the most-derived contract that has one."""
        found = self.index.functions.get(fn.node_id)
        if found is None or not self.inherits(found[0]):
            return fn
        signature = [p.attr("type_string") for p in _params(fn)]
        for contract in self.linearization:
            for item in contract.children_with("member"):
                if (item.kind == AstKind.FUNCTION and item.name == fn.name
                        and item.attr("implemented", True)
                        and [p.attr("type_string") for p in _params(item)] == signature):
                    return item
        return fn

    def by_name(self, name: str, arity: int) -> Optional[Tuple[AstNode, AstNode]]:
        candidates = list(self.linearization) + [
            c for c in self.index.contracts.values() if self.index.is_library(c)
        ]
        for contract in candidates:
            for item in contract.children_with("member"):
                if (item.kind == AstKind.FUNCTION and item.name == name
                        and len(_params(item)) == arity and item.attr("implemented", True)):
                    return contract, item
        return None

    def modifier(self, invocation: AstNode) -> Optional[AstNode]:
        ref = invocation.attr("referenced_declaration")
        declared = self.index.modifiers.get(ref)
        name = invocation.name or (declared[1].name if declared else None)
        for contract in self.linearization:
            for item in contract.children_with("member"):
                if item.kind == AstKind.MODIFIER and item.name == name:
                    return item
        return declared[1] if declared else None


class IpdgBuilder:
    """Accumulates artifacts into one `Ipdg`."""

    def __init__(self):
        self.ipdg = Ipdg()
        self._next_id = 0
        self._indexes: Dict[Tuple[int, ...], _UnitIndex] = {}
        self._state_names: Dict[Tuple[int, int], str] = {}
        self._built: Dict[Tuple[int, int], str] = {}
        self.pending_calls: List[Tuple[int, CallSite]] = []

    # --- Node helpers ---

    def new_node(self, **fields) -> IpdgNode:
        node = IpdgNode(id=self._next_id, **fields)
        self._next_id += 1
        self.ipdg.nodes[node.id] = node
        self.ipdg.graph.add_node(node.id)
        return node

    def diagnostic(self, code: str, message: str, contract: Optional[str] = None,
                   location: Optional[SourceRange] = None) -> None:
        logger.debug("%s: %s", code, message)
        self.ipdg.diagnostics.append(Diagnostic(phase="ipdg", code=code, message=message,
                                                contract=contract, location=location))

    def external_sink(self) -> int:
        if self.ipdg.external_sink is None:
            node = self.new_node(stmt_kind=StmtKind.EXTERNAL_SINK, src=SourceRange(start=0, length=0, file_index=-1),
                                 contract=EXTERNAL_SINK, function=EXTERNAL_SINK, function_key=EXTERNAL_SINK)
            self.ipdg.external_sink = node.id
        return self.ipdg.external_sink

    def _index_for(self, artifact: CompilationArtifact) -> _UnitIndex:
        units = artifact.ast_units or [artifact.ast_root]
        key = tuple(id(u) for u in units)
        if key not in self._indexes:
            self._indexes[key] = _UnitIndex(units)
        return self._indexes[key]

    # --- Declarations ---

    def _declare_state(self, index: _UnitIndex, container: AstNode, decl: AstNode) -> None:
        key = (id(index), decl.node_id)
        if key in self._state_names:
            return
        cname = _contract_name(container)
        qualified = f"{cname}.{decl.name}" if container.kind == AstKind.CONTRACT else decl.name
        self._state_names[key] = qualified
        mutability = decl.attr("mutability", "mutable")
        kind = VariableKind.CONSTANT if mutability == "constant" else VariableKind.STATE
        node = self.new_node(stmt_kind=StmtKind.STATE_VAR_DECL, src=decl.src, contract=cname,
                             function=GLOBAL_FUNCTION, function_key=f"{cname}.{GLOBAL_FUNCTION}", ast=decl)
        init = decl.child("init")
        if init is not None:
            node.writes.add(qualified)
            node.strong_writes.add(qualified)
            _FunctionBuilder.scan_detached(self, index, node, init)
        self.ipdg.variables[qualified] = VariableInfo(
            name=decl.name, qualified=qualified, kind=kind, type_string=decl.attr("type_string", ""),
            contract=cname, mutability=mutability, decl_node=node.id)
        self.ipdg.state_vars[qualified] = node.id

    def state_name(self, index: _UnitIndex, decl_id: Optional[int]) -> Optional[str]:
        return self._state_names.get((id(index), decl_id)) if decl_id is not None else None

    def function_key_for(self, index: _UnitIndex, fn: AstNode) -> Optional[str]:
        return self._built.get((id(index), fn.node_id))

    # --- Artifacts ---

    def add_artifact(self, artifact: CompilationArtifact) -> None:
        index = self._index_for(artifact)
        scope = _Scope(index, artifact.ast_root)
        name = artifact.contract_name
        if name not in self.ipdg.contracts:
            self.ipdg.contracts.append(name)

        for unit, decl in index.file_constants:
            self._declare_state(index, unit, decl)
        for contract in reversed(scope.linearization):
            for item in contract.children_with("member"):
                if item.kind == AstKind.VARIABLE:
                    self._declare_state(index, contract, item)

        selected: List[Tuple[AstNode, AstNode]] = []
        seen_signatures: Set[Tuple[str, Tuple[str, ...]]] = set()
        for contract in scope.linearization:
            for item in contract.children_with("member"):
                if item.kind != AstKind.FUNCTION or not item.attr("implemented", True) or item.child("body") is None:
                    continue
                if item.attr("function_kind") == "constructor":
                    selected.append((contract, item))
                    continue
                signature = (item.name, tuple(p.attr("type_string", "") for p in _params(item)))
                if signature in seen_signatures:
                    continue
                seen_signatures.add(signature)
                selected.append((contract, item))
        for _, (container, item) in sorted(index.functions.items()):
            if (index.is_library(container) or container.kind != AstKind.CONTRACT) and item.child("body") is not None:
                selected.append((container, item))

        builders = []
        for container, fn in selected:
            key = (id(index), fn.node_id)
            if key in self._built:
                continue
            builder = _FunctionBuilder(self, index, scope, container, fn)
            self._built[key] = builder.info.key
            builders.append(builder)
        for builder in builders:
            builder.build()

    # --- Finish ---

    def finish(self) -> Ipdg:
        ipdg = self.ipdg
        for site_node, call in self.pending_calls:
            if call.callee is not None and call.callee in ipdg.functions:
                callee = ipdg.functions[call.callee]
                ipdg.add_edge(site_node, callee.entry, EdgeKind.CALL)
                if callee.returns:
                    ipdg.add_edge(callee.exit, site_node, EdgeKind.RETURN)
            elif call.kind in (CallKind.EXTERNAL, CallKind.LOW_LEVEL):
                ipdg.add_edge(site_node, self.external_sink(), EdgeKind.CALL)

        self._state_data_edges()
        self._anti_dependences()
        self._write_summaries()

        ipdg.constants = constants_of(ipdg)
        logger.info("ipdg: %d nodes, %d edges, %d functions", len(ipdg.nodes),
                    ipdg.graph.number_of_edges(), len(ipdg.functions))
        return ipdg

    def _state_data_edges(self) -> None:
        ipdg = self.ipdg
        writers: Dict[str, List[int]] = {}
        readers: Dict[str, List[int]] = {}
        for node in ipdg.nodes.values():
            for var in node.writes:
                if var in ipdg.state_vars:
                    writers.setdefault(var, []).append(node.id)
            for var in node.reads:
                if var in ipdg.state_vars:
                    readers.setdefault(var, []).append(node.id)
        for var in sorted(writers):
            for w in sorted(writers[var]):
                for r in sorted(readers.get(var, [])):
                    if w != r:
                        ipdg.add_edge(w, r, EdgeKind.DATA, var)

    def _anti_dependences(self) -> None:
        ipdg = self.ipdg
        found = []
        for info in ipdg.functions.values():
            stmts = [ipdg.nodes[n] for n in info.statements]
            for i, reader in enumerate(stmts):
                for writer in stmts[i + 1:]:
                    for var in sorted(reader.reads & writer.writes):
                        if var in ipdg.state_vars:
                            found.append((reader.id, writer.id, var))
        ipdg.anti_dependences = sorted(found)

    def _write_summaries(self) -> None:
        ipdg = self.ipdg
        direct: Dict[str, Set[str]] = {key: set() for key in ipdg.functions}
        callees: Dict[str, Set[str]] = {key: set() for key in ipdg.functions}
        for node in ipdg.nodes.values():
            if node.function_key not in direct:
                continue
            direct[node.function_key] |= {v for v in node.writes if v in ipdg.state_vars}
            for call in node.calls:
                if call.callee in ipdg.functions:
                    callees[node.function_key].add(call.callee)
        summaries = {key: set(v) for key, v in direct.items()}
        changed = True
        while changed:
            changed = False
            for key in summaries:
                merged = set(summaries[key])
                for callee in callees[key]:
                    merged |= summaries[callee]
                if merged != summaries[key]:
                    summaries[key] = merged
                    changed = True
        ipdg.write_summaries = summaries


class _FunctionBuilder:
    """Emits the nodes and flow of one function, modifiers inlined."""

    def __init__(self, owner: IpdgBuilder, index: _UnitIndex, scope: _Scope, container: AstNode, fn: AstNode):
        self.owner = owner
        self.ipdg = owner.ipdg
        self.index = index
        self.scope = scope
        self.container = container
        self.fn = fn
        self.contract = _contract_name(container)
        self.key = function_key(container, fn)
        self.prefix = self.key
        self.locals: Dict[int, str] = {}
        self.local_names: Set[str] = set()
        self.flow: Flow = nx.DiGraph()
        self.loops: List[Tuple[int, List[int]]] = []
        self.returns_at: List[int] = []
        self.order = 0

        base = dict(contract=self.contract, function=fn.name, function_key=self.key)
        entry = owner.new_node(stmt_kind=StmtKind.FUNCTION_ENTRY, src=fn.src, order=0, ast=fn, **base)
        exit_ = owner.new_node(stmt_kind=StmtKind.FUNCTION_EXIT, src=fn.src, order=0, ast=fn, **base)
        self.entry, self.exit = entry, exit_
        self.flow.add_nodes_from([entry.id, exit_.id])

        params = [self._declare_local(p, VariableKind.PARAMETER) for p in _params(fn) if p.name]
        returns = []
        for i, p in enumerate(_params(fn, "returns")):
            if p.name:
                returns.append(self._declare_local(p, VariableKind.RETURN))
            else:
                returns.append(self._register(f"{self.key}.<ret{i}>", f"<ret{i}>", VariableKind.RETURN,
                                              p.attr("type_string", "")))
        entry.writes.update(params)
        entry.writes.update(returns)
        entry.strong_writes.update(entry.writes)
        selector = fn.attr("function_selector")
        self.info = FunctionInfo(
            key=self.key, contract=self.contract, name=fn.name,
            function_kind=fn.attr("function_kind", "function"), visibility=fn.attr("visibility", "public"),
            mutability=fn.attr("mutability", "nonpayable"), selector=f"0x{selector}" if selector else None,
            entry=entry.id, exit=exit_.id, params=params, returns=returns, ast_id=fn.node_id, src=fn.src)
        self.ipdg.functions[self.key] = self.info

    # --- Variables ---

    def _register(self, qualified: str, name: str, kind: VariableKind, type_string: str) -> str:
        self.local_names.add(qualified)
        self.ipdg.variables.setdefault(qualified, VariableInfo(
            name=name, qualified=qualified, kind=kind, type_string=type_string,
            contract=self.contract, function_key=self.key))
        return qualified

    def _declare_local(self, decl: AstNode, kind: VariableKind = VariableKind.LOCAL) -> str:
        qualified = self._register(f"{self.prefix}.{decl.name}", decl.name, kind, decl.attr("type_string", ""))
        self.locals[decl.node_id] = qualified
        return qualified

    def _var_of(self, ident: AstNode) -> Optional[str]:
        ref = ident.attr("referenced_declaration")
        if ref in self.locals:
            return self.locals[ref]
        state = self.owner.state_name(self.index, ref)
        if state is not None:
            return state
        decl = self.index.variables.get(ref)
        if decl is not None and not decl.attr("state_variable") and decl.name:
            return self._declare_local(decl)
        return None

    # --- Statement nodes ---

    def _node(self, kind: StmtKind, src: SourceRange, ast: Optional[AstNode], preds: Iterable[int],
              controller: int, guards: List[int]) -> IpdgNode:
        self.order += 1
        node = self.owner.new_node(stmt_kind=kind, src=src, contract=self.contract, function=self.fn.name,
                                   function_key=self.key, order=self.order, ast=ast)
        self.info.statements.append(node.id)
        self.flow.add_node(node.id)
        for p in preds:
            self.flow.add_edge(p, node.id)
        self.ipdg.add_edge(controller, node.id, EdgeKind.CONTROL)
        for g in guards:
            self.ipdg.add_edge(g, node.id, EdgeKind.CONTROL)
        return node

    def build(self) -> None:
        self.ipdg.add_edge(self.entry.id, self.exit.id, EdgeKind.CONTROL)
        invocations = [m for m in self.fn.children_with("modifier") if self.scope.modifier(m) is not None]
        preds = self._emit_chain(invocations, 0, [self.entry.id], self.entry.id, [])
        for p in preds:
            self.flow.add_edge(p, self.exit.id)
        for r in self.returns_at:
            self.flow.add_edge(r, self.exit.id)
        self.exit.order = self.order + 1
        self._local_data_edges()

    def _emit_chain(self, invocations: List[AstNode], i: int, preds: List[int], controller: int,
                    guards: List[int]) -> List[int]:
        if i == len(invocations):
            body = self.fn.child("body")
            saved, self.prefix = self.prefix, self.key
            try:
                return self._emit_block(body.children_with("stmt"), preds, controller, guards)[0]
            finally:
                self.prefix = saved
        invocation = invocations[i]
        modifier = self.scope.modifier(invocation)
        saved, self.prefix = self.prefix, f"{self.key}.{modifier.name}"
        try:
            for param, arg in zip(_params(modifier), invocation.children_with("arg")):
                node = self._node(StmtKind.ASSIGNMENT, arg.src, arg, preds, controller, guards)
                var = self._declare_local(param, VariableKind.PARAMETER)
                node.writes.add(var)
                node.strong_writes.add(var)
                self._scan(arg, node)
                preds = [node.id]

            def placeholder(p: List[int], ctrl: int, g: List[int]) -> List[int]:
                inner_prefix, self.prefix = self.prefix, self.key
                try:
                    return self._emit_chain(invocations, i + 1, p, ctrl, g)
                finally:
                    self.prefix = inner_prefix

            body = modifier.child("body")
            if body is None:
                return placeholder(preds, controller, guards)
            return self._emit_block(body.children_with("stmt"), preds, controller, guards, placeholder)[0]
        finally:
            self.prefix = saved

    def _emit_block(self, stmts: List[AstNode], preds: List[int], controller: int, guards: List[int],
                    placeholder: Optional[Callable] = None) -> Tuple[List[int], List[int]]:
        guards = list(guards)
        for stmt in stmts:
            preds, added = self._emit(stmt, preds, controller, guards, placeholder)
            guards.extend(added)
        return preds, guards

    def _emit(self, stmt: AstNode, preds: List[int], controller: int, guards: List[int],
              placeholder: Optional[Callable]) -> Tuple[List[int], List[int]]:
        kind = stmt.kind
        if kind == AstKind.BLOCK:
            return self._emit_block(stmt.children_with("stmt"), preds, controller, guards, placeholder)[0], []
        if kind == AstKind.PLACEHOLDER:
            return (placeholder(preds, controller, guards) if placeholder else preds), []
        if kind == AstKind.VARIABLE_STATEMENT:
            node = self._node(StmtKind.ASSIGNMENT, stmt.src, stmt, preds, controller, guards)
            for decl in stmt.children_with("decl"):
                if decl.kind == AstKind.VARIABLE and decl.name:
                    var = self._declare_local(decl)
                    node.writes.add(var)
                    node.strong_writes.add(var)
            init = stmt.child("init")
            if init is not None:
                self._scan(init, node)
            return [node.id], []
        if kind == AstKind.EXPRESSION_STATEMENT:
            return self._emit_expression(stmt, preds, controller, guards)
        if kind == AstKind.IF:
            cond = stmt.child("condition")
            node = self._node(StmtKind.IF, cond.src if cond else stmt.src, cond, preds, controller, guards)
            if cond is not None:
                self._scan(cond, node)
            out = self._emit_branch(stmt.child("then"), [node.id], node.id, placeholder)
            other = stmt.child("else")
            out += self._emit_branch(other, [node.id], node.id, placeholder) if other is not None else [node.id]
            return out, []
        if kind in LOOP_KINDS:
            return self._emit_loop(stmt, preds, controller, guards, placeholder), []
        if kind == AstKind.RETURN:
            node = self._node(StmtKind.RETURN, stmt.src, stmt, preds, controller, guards)
            value = stmt.child("value")
            if value is not None:
                self._scan(value, node)
                for ret in self.info.returns:
                    self.ipdg.add_edge(node.id, self.exit.id, EdgeKind.DATA, ret)
            self.returns_at.append(node.id)
            return [], []
        if kind == AstKind.BREAK and self.loops:
            self.loops[-1][1].extend(preds)
            return [], []
        if kind == AstKind.CONTINUE and self.loops:
            for p in preds:
                self.flow.add_edge(p, self.loops[-1][0])
            return [], []
        if kind == AstKind.INLINE_ASSEMBLY:
            node = self._node(StmtKind.EXPRESSION, stmt.src, stmt, preds, controller, guards)
            node.opaque = True
            return [node.id], []
        node = self._node(StmtKind.EXPRESSION, stmt.src, stmt, preds, controller, guards)
        for child in stmt.children:
            self._scan(child, node)
        return ([] if kind == AstKind.REVERT else [node.id]), []

    def _emit_branch(self, body: Optional[AstNode], preds: List[int], controller: int,
                     placeholder: Optional[Callable]) -> List[int]:
        if body is None:
            return preds
        stmts = body.children_with("stmt") if body.kind == AstKind.BLOCK else [body]
        return self._emit_block(stmts, preds, controller, [], placeholder)[0]

    def _emit_expression(self, stmt: AstNode, preds: List[int], controller: int,
                         guards: List[int]) -> Tuple[List[int], List[int]]:
        expr = stmt.child("expr")
        if expr is None:
            return preds, []
        if expr.kind == AstKind.REQUIRE:
            args = expr.children_with("arg")
            node = self._node(StmtKind.REQUIRE, stmt.src, args[0] if args else expr, preds, controller, guards)
            self._scan(expr, node)
            return [node.id], [node.id]
        if expr.kind == AstKind.ASSIGNMENT or (
                expr.kind == AstKind.UNARY and expr.attr("operator") in ("++", "--", "delete")):
            kind = StmtKind.ASSIGNMENT
        elif expr.kind in (AstKind.FUNCTION_CALL, AstKind.CALL_OPTIONS) and expr.attr("call_kind") == "functionCall":
            kind = StmtKind.CALL
        else:
            kind = StmtKind.EXPRESSION
        node = self._node(kind, stmt.src, stmt, preds, controller, guards)
        self._scan(expr, node)
        callee = expr.child("callee")
        if (expr.kind == AstKind.FUNCTION_CALL and callee is not None and callee.kind == AstKind.IDENTIFIER
                and callee.name in TERMINATING_CALLS
                and callee.attr("referenced_declaration") not in self.index.functions):
            node.stmt_kind = StmtKind.EXPRESSION
            return [], []
        return [node.id], []

    def _emit_loop(self, stmt: AstNode, preds: List[int], controller: int, guards: List[int],
                   placeholder: Optional[Callable]) -> List[int]:
        init = stmt.child("init")
        if init is not None:
            preds, _ = self._emit(init, preds, controller, guards, placeholder)
        cond = stmt.child("condition")
        node = self._node(StmtKind.LOOP, cond.src if cond is not None else stmt.src,
                          cond if cond is not None else stmt, preds, controller, guards)
        if cond is not None:
            self._scan(cond, node)
        breaks: List[int] = []
        self.loops.append((node.id, breaks))
        try:
            out = self._emit_branch(stmt.child("body"), [node.id], node.id, placeholder)
            step = stmt.child("step")
            if step is not None:
                out, _ = self._emit(step, out, node.id, [], placeholder)
        finally:
            self.loops.pop()
        for p in out:
            self.flow.add_edge(p, node.id)
        return [node.id] + breaks

    # --- Expression facts ---

    @staticmethod
    def scan_detached(owner: IpdgBuilder, index: _UnitIndex, node: IpdgNode, expr: AstNode) -> None:
        """Collect facts of a declaration initializer outside any function."""
        scanner = _ExpressionScanner(owner, index, None, node, lambda ident: owner.state_name(
            index, ident.attr("referenced_declaration")))
        scanner.scan(expr)

    def _scan(self, expr: AstNode, node: IpdgNode) -> None:
        _ExpressionScanner(self.owner, self.index, self.scope, node, self._var_of).scan(expr)

    # --- Local data dependences ---

    def _local_data_edges(self) -> None:
        nodes = {n: self.ipdg.nodes[n] for n in self.flow.nodes}
        gen: Dict[int, Set[Tuple[str, int]]] = {}
        kills: Dict[int, Set[str]] = {}
        for nid, node in nodes.items():
            gen[nid] = {(v, nid) for v in node.writes if v in self.local_names}
            kills[nid] = {v for v in node.strong_writes if v in self.local_names}
        reaching = reaching_definitions(self.flow, gen, kills)
        uses: Dict[int, Set[str]] = {nid: {v for v in n.reads if v in self.local_names} for nid, n in nodes.items()}
        uses[self.exit.id] = set(self.info.returns)
        for nid in sorted(nodes):
            for var, def_node in sorted(reaching.get(nid, set()), key=lambda d: (d[1], d[0])):
                if var in uses[nid] and def_node != nid:
                    self.ipdg.add_edge(def_node, nid, EdgeKind.DATA, var)


def reaching_definitions(flow: Flow, gen: Dict[int, Set[Tuple[str, int]]],
                         kills: Dict[int, Set[str]]) -> Dict[int, Set[Tuple[str, int]]]:
    """IN sets of the classic reaching-definitions worklist.

    Args:
        flow: Statement-level control flow.
        gen: Definitions (variable, node) each node creates.
        kills: Variables each node overwrites entirely.

    Returns:
        Node -> definitions live on entry to it.
    """
    out = {n: set(gen.get(n, ())) for n in flow.nodes}
    ins: Dict[int, Set[Tuple[str, int]]] = {n: set() for n in flow.nodes}
    worklist = deque(sorted(flow.nodes))
    queued = set(worklist)
    while worklist:
        n = worklist.popleft()
        queued.discard(n)
        incoming: Set[Tuple[str, int]] = set()
        for p in flow.predecessors(n):
            incoming |= out[p]
        ins[n] = incoming
        killed = kills.get(n, set())
        new_out = set(gen.get(n, ())) | {d for d in incoming if d[0] not in killed}
        if new_out != out[n]:
            out[n] = new_out
            for s in flow.successors(n):
                if s not in queued:
                    worklist.append(s)
                    queued.add(s)
    return ins


class _ExpressionScanner:
    """Fills reads, writes, env reads, calls and literals of one node."""

    def __init__(self, owner: IpdgBuilder, index: _UnitIndex, scope: Optional[_Scope], node: IpdgNode,
                 resolve: Callable[[AstNode], Optional[str]]):
        self.owner = owner
        self.index = index
        self.scope = scope
        self.node = node
        self.resolve = resolve

    def scan(self, expr: Optional[AstNode]) -> None:
        if expr is None:
            return
        kind = expr.kind
        if kind == AstKind.IDENTIFIER:
            self._identifier(expr)
        elif kind == AstKind.MEMBER_ACCESS:
            base = expr.child("base")
            env = ENV_MEMBERS.get((base.name, expr.attr("member_name"))) if (
                base is not None and base.kind == AstKind.IDENTIFIER) else None
            if env is not None:
                self.node.env_reads.add(env)
            else:
                self.scan(base)
        elif kind == AstKind.ASSIGNMENT:
            self._target(expr.child("lhs"), compound=expr.attr("operator") != "=")
            self.scan(expr.child("rhs"))
        elif kind == AstKind.UNARY and expr.attr("operator") in ("++", "--", "delete"):
            self._target(expr.child("operand"), compound=expr.attr("operator") != "delete")
        elif kind in (AstKind.FUNCTION_CALL, AstKind.REQUIRE):
            self._call(expr)
        elif kind == AstKind.LITERAL:
            if expr.attr("int_value") is not None and expr.attr("literal_kind") == "number":
                self.node.literals.append(LiteralFact(value=expr.attr("int_value"),
                                                      is_address=bool(expr.attr("is_address")), src=expr.src))
        elif kind == AstKind.INLINE_ASSEMBLY:
            self.node.opaque = True
        else:
            for child in expr.children:
                self.scan(child)

    def _identifier(self, ident: AstNode) -> None:
        var = self.resolve(ident)
        if var is not None:
            self.node.reads.add(var)
        elif ident.name in ENV_IDENTIFIERS:
            self.node.env_reads.add(ENV_IDENTIFIERS[ident.name])

    def _target(self, lhs: Optional[AstNode], compound: bool) -> None:
        if lhs is None:
            return
        if lhs.kind == AstKind.TUPLE:
            for component in lhs.children:
                self._target(component, compound)
            return
        strong = lhs.kind == AstKind.IDENTIFIER
        current = lhs
        while current is not None and current.kind in (AstKind.INDEX_ACCESS, AstKind.MEMBER_ACCESS):
            if current.kind == AstKind.INDEX_ACCESS:
                self.scan(current.child("index"))
            current = current.child("base")
        if current is None or current.kind != AstKind.IDENTIFIER:
            self.scan(current)
            return
        var = self.resolve(current)
        if var is None:
            return
        self.node.writes.add(var)
        if strong:
            self.node.strong_writes.add(var)
        if compound:
            self.node.reads.add(var)

    def _call(self, expr: AstNode) -> None:
        args = expr.children_with("arg")
        callee = expr.child("callee")
        call_kind = expr.attr("call_kind", "functionCall")
        if expr.kind == AstKind.REQUIRE or call_kind != "functionCall" or callee is None:
            if callee is not None and callee.kind not in (AstKind.IDENTIFIER, AstKind.TYPE_NAME):
                self.scan(callee)
            for a in args:
                self.scan(a)
            return

        sends_value = False
        if callee.kind == AstKind.CALL_OPTIONS:
            sends_value = "value" in (callee.attr("names") or [])
            for option in callee.children_with("option"):
                self.scan(option)
            callee = callee.child("callee")

        site: Optional[CallSite] = None
        if callee.kind == AstKind.IDENTIFIER:
            site = self._identifier_call(callee, expr, len(args))
        elif callee.kind == AstKind.MEMBER_ACCESS:
            site = self._member_call(callee, expr, sends_value)
        else:
            self.scan(callee)
        if site is not None:
            self.node.calls.append(site)
            if site.callee is not None or site.kind in (CallKind.EXTERNAL, CallKind.LOW_LEVEL):
                self.owner.pending_calls.append((self.node.id, site))
        for a in args:
            self.scan(a)

    def _identifier_call(self, callee: AstNode, expr: AstNode, arity: int) -> Optional[CallSite]:
        name = callee.name
        ref = callee.attr("referenced_declaration")
        if name == "gasleft" and ref not in self.index.functions:
            self.node.env_reads.add("gasleft")
            return None
        found = self.index.functions.get(ref)
        if found is None and self.scope is not None and name not in INTRINSICS and name not in TERMINATING_CALLS:
            found = self.scope.by_name(name, arity)
            if found is None and ref is None:
                self.owner.diagnostic("unresolved-call", f"no function {name}/{arity}",
                                      self.node.contract, callee.src)
        if found is not None:
            container, fn = found
            if self.scope is not None:
                fn = self.scope.most_derived(fn)
            key = self._key_of(fn)
            return CallSite(kind=CallKind.INTERNAL, name=name, src=expr.src, callee=key,
                            arg_count=arity, ast=expr)
        if name in INTRINSICS:
            if name == "blockhash":
                self.node.env_reads.add("blockhash")
            return CallSite(kind=CallKind.INTRINSIC, name=name, src=expr.src, arg_count=arity, ast=expr)
        return None

    def _key_of(self, fn: AstNode) -> Optional[str]:
        key = self.owner.function_key_for(self.index, fn)
        if key is not None:
            return key
        found = self.index.functions.get(fn.node_id)
        return function_key(found[0], fn) if found is not None else None

    def _member_call(self, callee: AstNode, expr: AstNode, sends_value: bool) -> Optional[CallSite]:
        member = callee.attr("member_name")
        base = callee.child("base")
        base_type = (base.attr("type_string") or "") if base is not None else ""
        arity = len(expr.children_with("arg"))
        if base is not None and base.kind == AstKind.IDENTIFIER and base.name in PURE_BASES:
            return None
        self.scan(base)
        if base_type.startswith("address") and member in ("transfer", "send"):
            kind = CallKind.TRANSFER if member == "transfer" else CallKind.SEND
            return CallSite(kind=kind, name=member, src=expr.src, sends_value=True, arg_count=arity,
                            ast=expr, target=base)
        if base_type.startswith("address") and member in LOW_LEVEL:
            return CallSite(kind=CallKind.LOW_LEVEL, name=member, src=expr.src, sends_value=sends_value,
                            arg_count=arity, ast=expr, target=base)
        ref = callee.attr("referenced_declaration")
        found = self.index.functions.get(ref)
        if found is not None:
            container, fn = found
            if self.index.is_library(container) or container.kind != AstKind.CONTRACT:
                return CallSite(kind=CallKind.INTERNAL, name=member, src=expr.src, callee=self._key_of(fn),
                                arg_count=arity, ast=expr)
            if base is not None and base.kind == AstKind.IDENTIFIER and base.name == "super":
                return CallSite(kind=CallKind.INTERNAL, name=member, src=expr.src, callee=self._key_of(fn),
                                arg_count=arity, ast=expr)
            key = None
            if fn.attr("implemented", True) and fn.child("body") is not None:
                if self.scope is not None and self.scope.inherits(container):
                    fn = self.scope.most_derived(fn)
                key = self._key_of(fn)
            return CallSite(kind=CallKind.EXTERNAL, name=member, src=expr.src, callee=key,
                            sends_value=sends_value, arg_count=arity, ast=expr, target=base)
        if base_type.startswith(("contract ", "type(contract")):
            return CallSite(kind=CallKind.EXTERNAL, name=member, src=expr.src, sends_value=sends_value,
                            arg_count=arity, ast=expr, target=base)
        if member in ("push", "pop") and base is not None:
            self._target(base, compound=True)
        return None


def build_ipdg(artifacts: List[CompilationArtifact]) -> Ipdg:
    """Build the dependency graph of one or more compiled contracts.

    Never raises for unusual constructs; they are recorded as diagnostics and
    handled conservatively.

    Args:
        artifacts: Artifacts to include, typically one deployed contract.

    Returns:
        The finished graph, constants included.
    """
    builder = IpdgBuilder()
    for artifact in artifacts:
        builder.add_artifact(artifact)
    return builder.finish()
