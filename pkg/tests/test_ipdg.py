import networkx as nx
import pytest

import figures
from equiv_guard.errors import PathBudgetExceeded
from equiv_guard.ipdg import (
    CallKind,
    EdgeKind,
    StmtKind,
    build_ipdg,
    data_closure,
    paths_between,
    reaching_definitions,
)
from solidity_dsl import SolAst

SETTER = "Fig4.setter(uint256)"
VERIFY = "Fig4.verifyEIP712(address,bytes32,uint8,bytes32,bytes32)"


def _calling(ipdg, name):
    return next(n for _, n in sorted(ipdg.nodes.items()) if any(c.name == name for c in n.calls))


def _writing(ipdg, function_key, variable):
    return next(n for n in ipdg.function_nodes(function_key) if variable in n.writes and n.stmt_kind != StmtKind.FUNCTION_ENTRY)


@pytest.fixture(scope="module")
def fig4():
    return build_ipdg([figures.ccra_setter()])


# --- Structure ---

def test_functions_and_state_variables(fig4):
    assert set(fig4.functions) == {SETTER, VERIFY}
    assert set(fig4.state_vars) == {"Fig4.DOMAIN_SEPARATOR", "Fig4.chainId"}
    setter = fig4.functions[SETTER]
    assert setter.params == [f"{SETTER}._chainId"]
    assert setter.externally_callable
    assert [fig4.nodes[n].stmt_kind for n in setter.statements] == [StmtKind.ASSIGNMENT, StmtKind.ASSIGNMENT]
    assert fig4.contracts == ["Fig4"]


def test_state_and_local_data_edges(fig4):
    setter = fig4.functions[SETTER]
    write_chain_id = _writing(fig4, SETTER, "Fig4.chainId")
    write_separator = _writing(fig4, SETTER, "Fig4.DOMAIN_SEPARATOR")
    digest = next(n for n in fig4.function_nodes(VERIFY) if f"{VERIFY}.hash" in n.writes)

    assert fig4.has_edge(setter.entry, write_chain_id.id, EdgeKind.DATA)
    assert fig4.has_edge(write_chain_id.id, write_separator.id, EdgeKind.DATA)
    assert fig4.has_edge(write_separator.id, digest.id, EdgeKind.DATA)
    assert fig4.has_edge(setter.entry, write_chain_id.id, EdgeKind.CONTROL)
    assert "Fig4.DOMAIN_SEPARATOR" in digest.reads


def test_intrinsic_call_is_recorded(fig4):
    recover = _calling(fig4, "ecrecover")

    (call,) = recover.calls
    assert call.kind == CallKind.INTRINSIC
    assert call.arg_count == 4
    assert recover.function_key == VERIFY


def test_paths_from_setter_entry_to_signature_check(fig4):
    entry = fig4.functions[SETTER].entry
    recover = _calling(fig4, "ecrecover").id

    paths = paths_between(fig4, [entry], [recover], max_len=16)

    assert len(paths) == 2
    assert all(p[0] == entry and p[-1] == recover for p in paths)
    assert paths == sorted(paths)
    assert paths_between(fig4, [recover], [recover], max_len=4) == [[recover]]


def test_path_cap_raises(fig4):
    entry = fig4.functions[SETTER].entry
    recover = _calling(fig4, "ecrecover").id

    with pytest.raises(PathBudgetExceeded):
        paths_between(fig4, [entry], [recover], max_len=16, cap=1)


def test_data_closure_reaches_both_entries(fig4):
    recover = _calling(fig4, "ecrecover").id

    closure = data_closure(fig4, recover)

    assert fig4.functions[SETTER].entry in closure
    assert fig4.functions[VERIFY].entry in closure


def test_canonical_form_is_deterministic():
    first = build_ipdg([figures.ccra_setter()]).canonical()
    second = build_ipdg([figures.ccra_setter()]).canonical()

    assert first == second
    assert first.splitlines()[0].startswith("N 0 StateVarDecl Fig4.<global>")


# --- Constants ---

def test_constants_follow_declarations_and_conversions():
    assert build_ipdg([figures.tdt_weekly_lock()]).constants["Fig5.BLOCKS_PER_WEEK"] == 43200
    assert build_ipdg([figures.bhm_dao_fork()]).constants["Fig9.DAO_FORK_BLOCK"] == 1760000

    swap = build_ipdg([figures.pca_hardcoded_router()]).constants
    assert swap["SwapToken.RouterAddr"] == int(figures.ROUTER, 16)
    assert swap["SwapToken.uniswapRouter"] == int(figures.ROUTER, 16)


def test_written_or_unfoldable_state_is_not_constant():
    assert "Fig7Fixed.gasReserve" not in build_ipdg([figures.gli_parameterized_gas()]).constants
    assert "SwapTokenFixed.uniswapRouter" not in build_ipdg([figures.pca_constructor_router()]).constants
    assert "AnyswapV5ERC20.DOMAIN_SEPARATOR" not in build_ipdg([figures.ccra_multichain()]).constants


def test_immutable_assigned_in_constructor_folds():
    ast = SolAst()
    limit = ast.var("LIMIT", "uint256", mutability="immutable")
    ctor = ast.constructor(body=[
        ast.expr_stmt(ast.assign(ast.ident(limit), ast.binop(ast.number(2), "*", ast.number(21000), "uint256"))),
    ])

    ipdg = build_ipdg([ast.artifact(ast.contract("Limits", [limit, ctor]))])

    assert ipdg.constants["Limits.LIMIT"] == 42000


# --- Control and calls ---

def test_require_controls_later_statements():
    ipdg = build_ipdg([figures.tdt_weekly_lock()])
    withdraw = ipdg.function_named("TimeLockedWithdraw")
    require, reset, transfer = (ipdg.nodes[n] for n in withdraw.statements)

    assert require.stmt_kind == StmtKind.REQUIRE
    assert "block.number" in require.env_reads
    assert ipdg.has_edge(require.id, reset.id, EdgeKind.CONTROL)
    assert ipdg.has_edge(require.id, transfer.id, EdgeKind.CONTROL)
    assert transfer.calls[0].kind == CallKind.TRANSFER
    assert ipdg.anti_dependences == sorted(ipdg.anti_dependences)


def test_modifier_body_is_inlined():
    ast = SolAst()
    owner = ast.var("owner", "address")
    count = ast.var("count", "uint256")
    only_owner = ast.modifier("onlyOwner", [
        ast.require(ast.binop(ast.env("msg", "sender", "address"), "==", ast.ident(owner))),
        ast.placeholder(),
    ])
    bump = ast.function("bump", modifiers=[ast.use_modifier(only_owner)], body=[
        ast.expr_stmt(ast.unary("++", ast.ident(count))),
    ])

    ipdg = build_ipdg([ast.artifact(ast.contract("Counter", [owner, count, only_owner, bump]))])
    require, increment = (ipdg.nodes[n] for n in ipdg.function_named("bump").statements)

    assert require.stmt_kind == StmtKind.REQUIRE
    assert "Counter.owner" in require.reads
    assert increment.writes == {"Counter.count"}
    assert ipdg.has_edge(require.id, increment.id, EdgeKind.CONTROL)


def test_internal_call_and_return_edges():
    ast = SolAst()
    x = ast.param("x", "uint256")
    double = ast.function("_double", params=[x], returns=[ast.param("", "uint256")], visibility="internal",
                          mutability="pure", body=[ast.ret(ast.binop(ast.ident(x), "*", ast.number(2), "uint256"))])
    y = ast.local("y", "uint256")
    run = ast.function("run", body=[ast.let(y, ast.call(ast.ident(double), ast.number(21), type_string="uint256"))])

    ipdg = build_ipdg([ast.artifact(ast.contract("Calls", [double, run]))])
    callee = ipdg.functions["Calls._double(uint256)"]
    (site,) = (ipdg.nodes[n] for n in ipdg.function_named("run").statements)

    assert site.calls[0].kind == CallKind.INTERNAL
    assert site.calls[0].callee == callee.key
    assert ipdg.has_edge(site.id, callee.entry, EdgeKind.CALL)
    assert ipdg.has_edge(callee.exit, site.id, EdgeKind.RETURN)
    assert not callee.externally_callable


def test_external_call_goes_to_the_external_sink():
    ipdg = build_ipdg([figures.pca_hardcoded_router()])
    site = _calling(ipdg, "swapExactETHForTokens")
    (call,) = site.calls

    assert call.kind == CallKind.EXTERNAL
    assert call.sends_value
    assert call.target is not None and call.target.name == "uniswapRouter"
    assert ipdg.external_sink is not None
    assert ipdg.has_edge(site.id, ipdg.external_sink, EdgeKind.CALL)


# --- Reaching definitions ---

def test_reaching_definitions_kill_and_merge():
    flow = nx.DiGraph([(1, 2), (2, 3), (1, 3), (3, 4)])
    gen = {1: {("x", 1)}, 2: {("x", 2)}, 3: {("y", 3)}}
    kills = {2: {"x"}}

    ins = reaching_definitions(flow, gen, kills)

    assert ins[2] == {("x", 1)}
    assert ins[3] == {("x", 1), ("x", 2)}
    assert ins[4] == {("x", 1), ("x", 2), ("y", 3)}


def test_reaching_definitions_around_a_loop():
    flow = nx.DiGraph([(1, 2), (2, 3), (3, 2), (2, 4)])
    gen = {1: {("i", 1)}, 3: {("i", 3)}}
    kills = {3: {"i"}}

    ins = reaching_definitions(flow, gen, kills)

    assert ins[2] == {("i", 1), ("i", 3)}
    assert ins[4] == {("i", 1), ("i", 3)}
