"""
ipdg.models - Nodes, edges and facts of the inter-contract program dependency graph.
"""

from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from equiv_guard.ingest.models import AstNode
from equiv_guard.models import Diagnostic, SourceRange

GLOBAL_FUNCTION = "<global>"
EXTERNAL_SINK = "<external>"


class StmtKind(str, Enum):
    EXPRESSION = "ExpressionStmt"
    ASSIGNMENT = "Assignment"
    REQUIRE = "Require/Assert"
    IF = "If"
    LOOP = "Loop"
    CALL = "Call"
    RETURN = "Return"
    STATE_VAR_DECL = "StateVarDecl"
    FUNCTION_ENTRY = "FunctionEntry"
    FUNCTION_EXIT = "FunctionExit"
    EXTERNAL_SINK = "ExternalSink"


class EdgeKind(str, Enum):
    CONTROL = "Control"
    DATA = "Data"
    CALL = "Call"
    RETURN = "Return"


class CallKind(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"
    INTRINSIC = "intrinsic"
    LOW_LEVEL = "low-level"
    TRANSFER = "transfer"
    SEND = "send"


class CallSite(BaseModel):
    """A call appearing inside a statement."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: CallKind
    name: str = Field(description="Callee name, e.g. 'ecrecover', 'transfer', 'swapExactETHForTokens'")
    src: SourceRange
    callee: Optional[str] = Field(default=None, description="Resolved function key, when the body is known")
    sends_value: bool = False
    arg_count: int = 0
    ast: Optional[AstNode] = Field(default=None, exclude=True, repr=False)
    target: Optional[AstNode] = Field(default=None, exclude=True, repr=False,
                                      description="Address expression the call goes to")


class LiteralFact(BaseModel):
    value: int
    is_address: bool = False
    src: SourceRange


class IpdgNode(BaseModel):
    """One statement-level node."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    id: int
    stmt_kind: StmtKind
    src: SourceRange
    contract: str
    function: str = Field(description="Function name, or '<global>' for declarations")
    function_key: str = Field(description="Unique key of the enclosing function")
    order: int = Field(default=0, description="Position in the function's statement order")
    reads: Set[str] = Field(default_factory=set)
    writes: Set[str] = Field(default_factory=set)
    strong_writes: Set[str] = Field(default_factory=set, description="Whole-variable writes that kill older defs")
    env_reads: Set[str] = Field(default_factory=set, description="e.g. block.number, block.chainid, gasleft")
    calls: List[CallSite] = Field(default_factory=list)
    literals: List[LiteralFact] = Field(default_factory=list)
    opaque: bool = Field(default=False, description="Inline assembly; contents unanalysed")
    ast: Optional[AstNode] = Field(default=None, exclude=True, repr=False,
                                   description="Statement AST; for If/Loop/Require the condition")

    def label(self) -> str:
        return f"{self.stmt_kind.value} {self.contract}.{self.function} @{self.src}"


class IpdgEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: int
    target: int
    kind: EdgeKind
    variable: Optional[str] = None


class VariableKind(str, Enum):
    STATE = "state"
    PARAMETER = "parameter"
    LOCAL = "local"
    RETURN = "return"
    CONSTANT = "constant"


class VariableInfo(BaseModel):
    name: str
    qualified: str
    kind: VariableKind
    type_string: str = ""
    contract: Optional[str] = None
    function_key: Optional[str] = None
    mutability: str = "mutable"
    decl_node: Optional[int] = None


class FunctionInfo(BaseModel):
    """Per-function bookkeeping."""
    key: str
    contract: str
    name: str
    function_kind: str = "function"
    visibility: str = "public"
    mutability: str = "nonpayable"
    selector: Optional[str] = None
    entry: int
    exit: int
    params: List[str] = Field(default_factory=list)
    returns: List[str] = Field(default_factory=list)
    statements: List[int] = Field(default_factory=list, description="Statement nodes in order")
    ast_id: Optional[int] = None
    src: Optional[SourceRange] = None

    @property
    def is_constructor(self) -> bool:
        return self.function_kind == "constructor"

    @property
    def externally_callable(self) -> bool:
        return self.visibility in ("public", "external") and not self.is_constructor


class Ipdg(BaseModel):
    """The dependency graph with its symbol tables."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    graph: nx.MultiDiGraph = Field(default_factory=nx.MultiDiGraph, exclude=True)
    nodes: Dict[int, IpdgNode] = Field(default_factory=dict)
    functions: Dict[str, FunctionInfo] = Field(default_factory=dict)
    variables: Dict[str, VariableInfo] = Field(default_factory=dict)
    state_vars: Dict[str, int] = Field(default_factory=dict, description="Qualified name -> declaring node")
    constants: Dict[str, int] = Field(default_factory=dict)
    anti_dependences: List[Tuple[int, int, str]] = Field(
        default_factory=list, description="(reading node, later writing node, variable) in statement order")
    write_summaries: Dict[str, Set[str]] = Field(default_factory=dict, description="Function key -> state vars written, transitively")
    contracts: List[str] = Field(default_factory=list)
    diagnostics: List[Diagnostic] = Field(default_factory=list)
    external_sink: Optional[int] = None

    # --- Graph access ---

    def add_edge(self, source: int, target: int, kind: EdgeKind, variable: Optional[str] = None) -> None:
        key = (kind.value, variable)
        if not self.graph.has_edge(source, target, key=key):
            self.graph.add_edge(source, target, key=key, kind=kind, variable=variable)

    @property
    def edges(self) -> List[IpdgEdge]:
        return sorted(
            (IpdgEdge(source=u, target=v, kind=d["kind"], variable=d["variable"])
             for u, v, d in self.graph.edges(data=True)),
            key=lambda e: (e.source, e.target, e.kind.value, e.variable or ""),
        )

    def in_edges(self, node: int, kinds: Optional[Set[EdgeKind]] = None) -> List[IpdgEdge]:
        found = [
            IpdgEdge(source=u, target=v, kind=d["kind"], variable=d["variable"])
            for u, v, d in self.graph.in_edges(node, data=True)
            if kinds is None or d["kind"] in kinds
        ]
        return sorted(found, key=lambda e: (e.source, e.kind.value, e.variable or ""))

    def out_edges(self, node: int, kinds: Optional[Set[EdgeKind]] = None) -> List[IpdgEdge]:
        found = [
            IpdgEdge(source=u, target=v, kind=d["kind"], variable=d["variable"])
            for u, v, d in self.graph.out_edges(node, data=True)
            if kinds is None or d["kind"] in kinds
        ]
        return sorted(found, key=lambda e: (e.target, e.kind.value, e.variable or ""))

    def has_edge(self, source: int, target: int, kind: Optional[EdgeKind] = None) -> bool:
        if not self.graph.has_edge(source, target):
            return False
        if kind is None:
            return True
        return any(d["kind"] == kind for d in self.graph.get_edge_data(source, target).values())

    def function_nodes(self, key: str) -> List[IpdgNode]:
        return sorted((n for n in self.nodes.values() if n.function_key == key), key=lambda n: (n.order, n.id))

    def function_named(self, name: str, contract: Optional[str] = None) -> Optional[FunctionInfo]:
        for info in self.functions.values():
            if info.name == name and (contract is None or info.contract == contract):
                return info
        return None

    def canonical(self) -> str:
        """Deterministic text form: nodes then edges, one per line."""
        lines = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            lines.append(f"N {nid} {n.stmt_kind.value} {n.function_key} {n.src}")
        for e in self.edges:
            suffix = f" {e.variable}" if e.variable else ""
            lines.append(f"E {e.source} {e.target} {e.kind.value}{suffix}")
        return "\n".join(lines) + "\n"
