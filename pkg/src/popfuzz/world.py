"""Deterministic DeFi world model: token ledgers, contract dispatch, tx execution.

Amounts are arbitrary-precision unsigned integers capped at 2**256 - 1; all
arithmetic is checked and failures revert. A reverted transaction restores the
pre-transaction state but does not abort the rest of the sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

UINT_MAX = 2**256 - 1

# Address is a 20-byte identifier rendered as 0x-prefixed lowercase hex.
# Lexicographic order on the canonical string equals byte order.
Address = str

ZERO_ADDRESS: Address = "0x" + "00" * 20
BURN_ADDRESS: Address = "0x" + "00" * 18 + "dead"
NATIVE: Address = "native"  # sentinel for the chain's native currency


def make_address(n: int) -> Address:
    """Deterministic synthetic address from a small integer."""
    if not 0 <= n < 2**160:
        raise ValueError("address index out of range")
    return "0x" + format(n, "040x")


class Revert(Exception):
    """Raised by contract code to abort and roll back the current transaction."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def checked_add(a: int, b: int) -> int:
    c = a + b
    if c > UINT_MAX:
        raise Revert("overflow")
    return c


def checked_sub(a: int, b: int) -> int:
    if b > a:
        raise Revert("underflow")
    return a - b


def checked_mul(a: int, b: int) -> int:
    c = a * b
    if c > UINT_MAX:
        raise Revert("overflow")
    return c


@dataclass(frozen=True)
class TokenDef:
    """Static token configuration. Mutable token state lives in WorldState."""

    address: Address
    symbol: str
    # Per-mille fee charged on top of the transferred amount when the transfer
    # touches a pair address (the "pre-computed fee" pattern). 0 disables.
    fee_rate: int = 0
    # "to_pair": fee only on transfers into a pair; "both": either direction.
    fee_direction: str = "to_pair"
    public_mint: bool = False
    public_burn: bool = False
    is_lp: bool = False


@dataclass
class PairState:
    """Constant-product pair. token0 < token1 under address order."""

    address: Address
    token0: Address
    token1: Address
    reserve0: int
    reserve1: int
    lp_token: Address
    lp_supply: int = 0

    def copy(self) -> "PairState":
        return PairState(
            self.address,
            self.token0,
            self.token1,
            self.reserve0,
            self.reserve1,
            self.lp_token,
            self.lp_supply,
        )


@dataclass
class ContractState:
    """A scenario contract: behavior selected by kind, state in a flat dict."""

    address: Address
    kind: str
    storage: dict

    def copy(self) -> "ContractState":
        return ContractState(self.address, self.kind, dict(self.storage))


@dataclass
class WorldState:
    tokens: dict[Address, TokenDef] = field(default_factory=dict)
    balances: dict[tuple[Address, Address], int] = field(default_factory=dict)
    allowances: dict[tuple[Address, Address, Address], int] = field(default_factory=dict)
    native_balances: dict[Address, int] = field(default_factory=dict)
    supplies: dict[Address, int] = field(default_factory=dict)
    pairs: dict[Address, PairState] = field(default_factory=dict)
    contracts: dict[Address, ContractState] = field(default_factory=dict)
    macros: dict = field(default_factory=dict)  # name -> actions.MacroDef, shared
    block_number: int = 0

    def copy(self) -> "WorldState":
        return WorldState(
            tokens=self.tokens,  # immutable defs, shared
            balances=dict(self.balances),
            allowances=dict(self.allowances),
            native_balances=dict(self.native_balances),
            supplies=dict(self.supplies),
            pairs={a: p.copy() for a, p in self.pairs.items()},
            contracts={a: c.copy() for a, c in self.contracts.items()},
            macros=self.macros,
            block_number=self.block_number,
        )

    # --- ledger access -----------------------------------------------------

    def balance_of(self, token: Address, holder: Address) -> int:
        return self.balances.get((token, holder), 0)

    def set_balance(self, token: Address, holder: Address, amount: int) -> None:
        key = (token, holder)
        if amount == 0:
            self.balances.pop(key, None)
        else:
            if amount > UINT_MAX:
                raise Revert("overflow")
            self.balances[key] = amount

    def native_of(self, holder: Address) -> int:
        return self.native_balances.get(holder, 0)

    def set_native(self, holder: Address, amount: int) -> None:
        if amount == 0:
            self.native_balances.pop(holder, None)
        else:
            self.native_balances[holder] = amount

    def allowance(self, token: Address, owner: Address, spender: Address) -> int:
        return self.allowances.get((token, owner, spender), 0)

    def set_allowance(self, token: Address, owner: Address, spender: Address, amount: int) -> None:
        key = (token, owner, spender)
        if amount == 0:
            self.allowances.pop(key, None)
        else:
            self.allowances[key] = amount


def snapshot(state: WorldState) -> WorldState:
    """States are small at desk scale, so a snapshot is a full copy."""
    return state.copy()


@dataclass(frozen=True)
class TransferEvent:
    token: Address
    src: Address
    dst: Address
    amount: int
    tx_index: int


@dataclass(frozen=True)
class NativeFlow:
    src: Address
    dst: Address
    amount: int
    tx_index: int


@dataclass(frozen=True)
class PairCheck:
    """Per-transaction pair health sample used by the imbalance criterion."""

    pair: Address
    reserve0: int
    reserve1: int
    balance0: int
    balance1: int
    k_decreased: bool
    tx_index: int

    @property
    def imbalanced(self) -> bool:
        return (
            self.reserve0 != self.balance0
            or self.reserve1 != self.balance1
            or self.k_decreased
        )


RETURNED = "returned"
REVERTED = "reverted"


@dataclass(frozen=True)
class TxOutcome:
    status: str  # RETURNED or REVERTED
    reason: str = ""
    logical_index: int = -1  # index into the attacker sequence, -1 for victim txs
    is_victim: bool = False
    ok: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ok", self.status == RETURNED)


@dataclass
class ExecutionReceipt:
    outcomes: list[TxOutcome]
    events: list[TransferEvent]
    native_flows: list[NativeFlow]
    pair_checks: list[PairCheck]
    state: WorldState


class CallContext:
    """Execution context for one transaction (and its internal calls)."""

    __slots__ = ("state", "sender", "msg_value", "tx_index", "recorder", "depth")

    def __init__(self, state: WorldState, sender: Address, msg_value: int, tx_index: int, recorder):
        self.state = state
        self.sender = sender
        self.msg_value = msg_value
        self.tx_index = tx_index
        self.recorder = recorder
        self.depth = 0

    def emit_transfer(self, token: Address, src: Address, dst: Address, amount: int) -> None:
        if amount > 0:
            self.recorder.append(TransferEvent(token, src, dst, amount, self.tx_index))


# --- ERC20 substrate -------------------------------------------------------


def _transfer_fee(state: WorldState, token: TokenDef, src: Address, dst: Address) -> int:
    if token.fee_rate == 0:
        return 0
    to_pair = dst in state.pairs
    from_pair = src in state.pairs
    if token.fee_direction == "to_pair":
        return token.fee_rate if to_pair else 0
    return token.fee_rate if (to_pair or from_pair) else 0


def token_transfer(ctx: CallContext, token: Address, src: Address, dst: Address, amount: int) -> None:
    """Move tokens, applying the fee hook if configured. Zero transfers revert."""
    state = ctx.state
    tdef = state.tokens.get(token)
    if tdef is None:
        raise Revert("unknown token")
    if amount == 0:
        raise Revert("zero transfer")
    rate = _transfer_fee(state, tdef, src, dst)
    fee = amount * rate // 1000
    debit = checked_add(amount, fee)
    state.set_balance(token, src, checked_sub(state.balance_of(token, src), debit))
    state.set_balance(token, dst, checked_add(state.balance_of(token, dst), amount))
    ctx.emit_transfer(token, src, dst, amount)
    if fee > 0:
        state.set_balance(token, BURN_ADDRESS, checked_add(state.balance_of(token, BURN_ADDRESS), fee))
        ctx.emit_transfer(token, src, BURN_ADDRESS, fee)


def token_mint(ctx: CallContext, token: Address, to: Address, amount: int) -> None:
    state = ctx.state
    if amount == 0:
        raise Revert("zero mint")
    state.supplies[token] = checked_add(state.supplies.get(token, 0), amount)
    state.set_balance(token, to, checked_add(state.balance_of(token, to), amount))
    ctx.emit_transfer(token, ZERO_ADDRESS, to, amount)


def token_burn(ctx: CallContext, token: Address, src: Address, amount: int) -> None:
    # Burn is modeled as a forced transfer to the burn address so that the
    # per-token conservation invariant (holders + burn = supply) holds.
    state = ctx.state
    if amount == 0:
        raise Revert("zero burn")
    state.set_balance(token, src, checked_sub(state.balance_of(token, src), amount))
    state.set_balance(token, BURN_ADDRESS, checked_add(state.balance_of(token, BURN_ADDRESS), amount))
    ctx.emit_transfer(token, src, BURN_ADDRESS, amount)


def erc20_call(ctx: CallContext, token: Address, fn: str, args: tuple):
    state = ctx.state
    tdef = state.tokens.get(token)
    if tdef is None:
        raise Revert("unknown token")
    if fn == "transfer":
        to, amount = args
        _check_amount(amount)
        token_transfer(ctx, token, ctx.sender, to, amount)
        return True
    if fn == "approve":
        spender, amount = args
        _check_amount(amount)
        state.set_allowance(token, ctx.sender, spender, amount)
        return True
    if fn == "transferFrom":
        src, dst, amount = args
        _check_amount(amount)
        allowed = state.allowance(token, src, ctx.sender)
        if allowed < amount:
            raise Revert("insufficient allowance")
        state.set_allowance(token, src, ctx.sender, allowed - amount)
        token_transfer(ctx, token, src, dst, amount)
        return True
    if fn == "balanceOf":
        (holder,) = args
        return state.balance_of(token, holder)
    if fn == "totalSupply":
        return state.supplies.get(token, 0)
    if fn == "mint":
        if not tdef.public_mint:
            raise Revert("mint not allowed")
        to, amount = args
        _check_amount(amount)
        token_mint(ctx, token, to, amount)
        return True
    if fn == "burn":
        if not tdef.public_burn:
            raise Revert("burn not allowed")
        src, amount = args
        _check_amount(amount)
        token_burn(ctx, token, src, amount)
        return True
    raise Revert("unknown function")


def _check_amount(amount) -> None:
    if not isinstance(amount, int) or isinstance(amount, bool) or amount < 0 or amount > UINT_MAX:
        raise Revert("bad amount")


# --- transactions ----------------------------------------------------------


@dataclass(frozen=True)
class RawCall:
    target: Address
    fn: str
    args: tuple


@dataclass(frozen=True)
class Transaction:
    sender: Address
    kind: object  # RawCall or actions.ActionSpec
    value: int = 0
    repeat: int = 1

    def __post_init__(self):
        if not 1 <= self.repeat <= 1000:
            raise ValueError("repeat out of [1, 1000]")


# Dispatcher is injected to avoid a circular import with amm/scenarios/actions.
# Signature: dispatch(ctx, state, tx_kind) -> result
_DISPATCH: Optional[Callable] = None


def set_dispatcher(fn: Callable) -> None:
    global _DISPATCH
    _DISPATCH = fn


def run_transaction(state: WorldState, tx: Transaction, tx_index: int, recorder: list):
    """Execute one (already repeat-expanded) transaction in place. Raises Revert."""
    ctx = CallContext(state, tx.sender, tx.value, tx_index, recorder)
    if tx.value > 0:
        have = state.native_of(tx.sender)
        if have < tx.value:
            raise Revert("insufficient native balance")
        state.set_native(tx.sender, have - tx.value)
        target = _tx_target(tx)
        state.set_native(target, state.native_of(target) + tx.value)
    return _DISPATCH(ctx, tx.kind)


def _tx_target(tx: Transaction) -> Address:
    kind = tx.kind
    if isinstance(kind, RawCall):
        return kind.target
    return tx.sender  # actions run "inside" the attacker contract


def execute_sequence(
    state: WorldState,
    txs: list[Transaction],
    max_len: int = 16,
    logical_indices: Optional[list[int]] = None,
    victim_flags: Optional[list[bool]] = None,
) -> ExecutionReceipt:
    """Run a transaction list over a copy of `state`.

    Each repeat of a transaction is an independent transaction: a failing
    repetition reverts only itself. Execution continues past reverts.
    """
    n_logical = len(txs) if victim_flags is None else sum(1 for v in victim_flags if not v)
    if n_logical > max_len:
        raise ValueError(f"sequence length {n_logical} exceeds max {max_len}")

    work = state.copy()
    outcomes: list[TxOutcome] = []
    events: list[TransferEvent] = []
    native_flows: list[NativeFlow] = []
    pair_checks: list[PairCheck] = []

    tx_index = 0
    for pos, tx in enumerate(txs):
        logical = logical_indices[pos] if logical_indices is not None else pos
        is_victim = victim_flags[pos] if victim_flags is not None else False

        # One snapshot covers all repeats of this transaction. Repeats run
        # optimistically without per-repeat snapshots; if repeat r reverts,
        # the pre-transaction state is restored and the r successful repeats
        # are deterministically re-run (without re-recording). A reverted
        # repeat leaves the state untouched, so every later repeat of the
        # same transaction reverts identically and is short-circuited.
        block_snap = work.copy()
        # All repeats of one transaction share the same outcome values, so a
        # single immutable instance is reused for every repetition.
        returned = TxOutcome(RETURNED, "", logical, is_victim)
        for rep in range(tx.repeat):
            pairs = work.pairs
            pre_k = {a: p.reserve0 * p.reserve1 for a, p in pairs.items()} if pairs else None
            recorder: list[TransferEvent] = []
            try:
                run_transaction(work, tx, tx_index, recorder)
            except Revert as exc:
                work = block_snap
                discard: list[TransferEvent] = []
                for _ in range(rep):
                    run_transaction(work, tx, tx_index, discard)
                    discard.clear()
                left = tx.repeat - rep
                outcomes.extend([TxOutcome(REVERTED, exc.reason, logical, is_victim)] * left)
                tx_index += left
                break
            else:
                outcomes.append(returned)
                events.extend(recorder)
                if tx.value > 0:
                    native_flows.append(
                        NativeFlow(tx.sender, _tx_target(tx), tx.value, tx_index)
                    )
                balances = work.balances
                for addr, p in pairs.items():
                    b0 = balances.get((p.token0, addr), 0)
                    b1 = balances.get((p.token1, addr), 0)
                    k_decreased = p.reserve0 * p.reserve1 < pre_k[addr]
                    if p.reserve0 != b0 or p.reserve1 != b1 or k_decreased:
                        pair_checks.append(
                            PairCheck(addr, p.reserve0, p.reserve1, b0, b1,
                                      k_decreased, tx_index)
                        )
                tx_index += 1

    return ExecutionReceipt(outcomes, events, native_flows, pair_checks, work)
