"""Uniswap-V2-style pair and router mechanics.

Fee is fixed at 0.3% (997/1000). All division floors, matching Solidity.
Stored reserves and actual pair balances may diverge until sync/skim; that
divergence is the imbalance signal the oracle looks for.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

from .world import (
    Address,
    CallContext,
    PairState,
    Revert,
    WorldState,
    checked_add,
    checked_mul,
    make_address,
    token_transfer,
)

ROUTER_ADDRESS: Address = make_address(0xF00F)

FEE_NUM = 997
FEE_DEN = 1000


def get_amount_out(amount_in: int, reserve_in: int, reserve_out: int) -> int:
    """Constant-product output with 0.3% fee, checked 256-bit arithmetic."""
    if amount_in == 0 or reserve_in == 0 or reserve_out == 0:
        return 0
    num = checked_mul(checked_mul(amount_in, FEE_NUM), reserve_out)
    den = checked_add(checked_mul(reserve_in, FEE_DEN), amount_in * FEE_NUM)
    return num // den


def find_pair(state: WorldState, token_a: Address, token_b: Address) -> Optional[PairState]:
    t0, t1 = (token_a, token_b) if token_a < token_b else (token_b, token_a)
    for addr in sorted(state.pairs):
        p = state.pairs[addr]
        if p.token0 == t0 and p.token1 == t1:
            return p
    return None


def _reserves_for(pair: PairState, token_in: Address) -> tuple[int, int]:
    if token_in == pair.token0:
        return pair.reserve0, pair.reserve1
    return pair.reserve1, pair.reserve0


def sync_pair(state: WorldState, pair: PairState) -> None:
    pair.reserve0 = state.balance_of(pair.token0, pair.address)
    pair.reserve1 = state.balance_of(pair.token1, pair.address)


# --- router ----------------------------------------------------------------


def swap_exact_in(ctx: CallContext, token_in: Address, token_out: Address, amount_in: int) -> int:
    """Single-hop exact-input swap with fee-on-transfer support.

    Output is computed from the amount the pair actually receives, so fee
    tokens that shave the transfer still swap correctly.
    """
    state = ctx.state
    pair = find_pair(state, token_in, token_out)
    if pair is None:
        raise Revert("no pair")
    reserve_in, reserve_out = _reserves_for(pair, token_in)
    if reserve_in == 0 or reserve_out == 0:
        raise Revert("empty reserves")
    if amount_in == 0:
        raise Revert("insufficient output")
    allowed = state.allowance(token_in, ctx.sender, ROUTER_ADDRESS)
    if allowed < amount_in:
        raise Revert("insufficient allowance")
    state.set_allowance(token_in, ctx.sender, ROUTER_ADDRESS, allowed - amount_in)
    token_transfer(ctx, token_in, ctx.sender, pair.address, amount_in)
    received = state.balance_of(token_in, pair.address) - reserve_in
    amount_out = get_amount_out(received, reserve_in, reserve_out)
    if amount_out <= 0:
        raise Revert("insufficient output")
    token_transfer(ctx, token_out, pair.address, ctx.sender, amount_out)
    sync_pair(state, pair)
    return amount_out


def add_liquidity(
    ctx: CallContext, token_a: Address, token_b: Address, amount_a: int, amount_b: int
) -> int:
    state = ctx.state
    pair = find_pair(state, token_a, token_b)
    if pair is None:
        raise Revert("no pair")
    for token, amount in ((token_a, amount_a), (token_b, amount_b)):
        if amount == 0:
            raise Revert("zero deposit")
        allowed = state.allowance(token, ctx.sender, ROUTER_ADDRESS)
        if allowed < amount:
            raise Revert("insufficient allowance")
        state.set_allowance(token, ctx.sender, ROUTER_ADDRESS, allowed - amount)
        token_transfer(ctx, token, ctx.sender, pair.address, amount)
    return pair_mint(ctx, pair.address, ctx.sender)


def remove_liquidity(ctx: CallContext, pair_addr: Address, lp_amount: int) -> tuple[int, int]:
    state = ctx.state
    pair = state.pairs.get(pair_addr)
    if pair is None:
        raise Revert("no pair")
    if lp_amount == 0:
        raise Revert("zero burn")
    allowed = state.allowance(pair.lp_token, ctx.sender, ROUTER_ADDRESS)
    if allowed < lp_amount:
        raise Revert("insufficient allowance")
    state.set_allowance(pair.lp_token, ctx.sender, ROUTER_ADDRESS, allowed - lp_amount)
    token_transfer(ctx, pair.lp_token, ctx.sender, pair_addr, lp_amount)
    return pair_burn(ctx, pair_addr, ctx.sender)


# --- low-level pair functions ----------------------------------------------


def pair_mint(ctx: CallContext, pair_addr: Address, to: Address) -> int:
    """Mint LP for tokens already transferred to the pair. No minimum-liquidity lock."""
    state = ctx.state
    pair = state.pairs.get(pair_addr)
    if pair is None:
        raise Revert("no pair")
    bal0 = state.balance_of(pair.token0, pair_addr)
    bal1 = state.balance_of(pair.token1, pair_addr)
    recv0 = bal0 - pair.reserve0
    recv1 = bal1 - pair.reserve1
    if recv0 < 0 or recv1 < 0:
        raise Revert("reserve deficit")
    if pair.lp_supply == 0:
        minted = math.isqrt(recv0 * recv1)
    else:
        m0 = recv0 * pair.lp_supply // pair.reserve0 if pair.reserve0 else 0
        m1 = recv1 * pair.lp_supply // pair.reserve1 if pair.reserve1 else 0
        minted = min(m0, m1)
    if minted == 0:
        raise Revert("insufficient liquidity minted")
    pair.lp_supply = checked_add(pair.lp_supply, minted)
    state.supplies[pair.lp_token] = pair.lp_supply
    state.set_balance(pair.lp_token, to, checked_add(state.balance_of(pair.lp_token, to), minted))
    ctx.emit_transfer(pair.lp_token, pair_addr, to, minted)
    sync_pair(state, pair)
    return minted


def pair_burn(ctx: CallContext, pair_addr: Address, to: Address) -> tuple[int, int]:
    """Burn LP held at the pair address, paying pro-rata floor shares of balances."""
    state = ctx.state
    pair = state.pairs.get(pair_addr)
    if pair is None:
        raise Revert("no pair")
    lp = state.balance_of(pair.lp_token, pair_addr)
    if lp == 0 or pair.lp_supply == 0:
        raise Revert("insufficient liquidity burned")
    bal0 = state.balance_of(pair.token0, pair_addr)
    bal1 = state.balance_of(pair.token1, pair_addr)
    amount0 = lp * bal0 // pair.lp_supply
    amount1 = lp * bal1 // pair.lp_supply
    if amount0 == 0 and amount1 == 0:
        raise Revert("insufficient liquidity burned")
    state.set_balance(pair.lp_token, pair_addr, 0)
    pair.lp_supply -= lp
    state.supplies[pair.lp_token] = pair.lp_supply
    if amount0:
        token_transfer(ctx, pair.token0, pair_addr, to, amount0)
    if amount1:
        token_transfer(ctx, pair.token1, pair_addr, to, amount1)
    sync_pair(state, pair)
    return amount0, amount1


def pair_swap(
    ctx: CallContext,
    pair_addr: Address,
    out0: int,
    out1: int,
    callback: Optional[Callable[[], None]] = None,
) -> None:
    """Low-level optimistic swap / flashloan with the fee-adjusted k check."""
    state = ctx.state
    pair = state.pairs.get(pair_addr)
    if pair is None:
        raise Revert("no pair")
    if out0 == 0 and out1 == 0:
        raise Revert("insufficient output")
    if out0 >= pair.reserve0 or out1 >= pair.reserve1:
        raise Revert("insufficient liquidity")
    reserve0, reserve1 = pair.reserve0, pair.reserve1
    if out0:
        token_transfer(ctx, pair.token0, pair_addr, ctx.sender, out0)
    if out1:
        token_transfer(ctx, pair.token1, pair_addr, ctx.sender, out1)
    if callback is not None:
        callback()
    bal0 = state.balance_of(pair.token0, pair_addr)
    bal1 = state.balance_of(pair.token1, pair_addr)
    in0 = max(0, bal0 - (reserve0 - out0))
    in1 = max(0, bal1 - (reserve1 - out1))
    if in0 == 0 and in1 == 0:
        raise Revert("insufficient input")
    adj0 = checked_mul(bal0, 1000) - in0 * 3
    adj1 = checked_mul(bal1, 1000) - in1 * 3
    if adj0 * adj1 < reserve0 * reserve1 * 1000 * 1000:
        raise Revert("K")
    sync_pair(state, pair)


def pair_skim(ctx: CallContext, pair_addr: Address, to: Address) -> None:
    state = ctx.state
    pair = state.pairs.get(pair_addr)
    if pair is None:
        raise Revert("no pair")
    surplus0 = state.balance_of(pair.token0, pair_addr) - pair.reserve0
    surplus1 = state.balance_of(pair.token1, pair_addr) - pair.reserve1
    if surplus0 <= 0 and surplus1 <= 0:
        raise Revert("nothing to skim")
    if surplus0 > 0:
        token_transfer(ctx, pair.token0, pair_addr, to, surplus0)
    if surplus1 > 0:
        token_transfer(ctx, pair.token1, pair_addr, to, surplus1)


def pair_sync(ctx: CallContext, pair_addr: Address) -> None:
    pair = ctx.state.pairs.get(pair_addr)
    if pair is None:
        raise Revert("no pair")
    sync_pair(ctx.state, pair)
