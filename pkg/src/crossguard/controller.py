"""Crossing control state machine.

Combines the debounced train-approach signal with an ROI occupancy
test to drive the level bar and the changeable-message-sign warning.
Lowering only happens on a clear ROI; an occupied ROI while a train
approaches forces the bar up and a warning broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .geometry import BBox, overlaps_roi
from .segmentation import TrainSignalState, update_train_signal

TRAIN_CLASS = "train"


class Mode(str, Enum):
    NORMAL = "NORMAL"
    WARNING = "WARNING"
    LOWERED = "LOWERED"


class Bar(str, Enum):
    UP = "UP"
    DOWN = "DOWN"


class Action(str, Enum):
    LOWER_BAR = "LOWER_BAR"
    RAISE_BAR = "RAISE_BAR"
    BROADCAST_WARNING = "BROADCAST_WARNING"
    CLEAR_WARNING = "CLEAR_WARNING"
    NONE = "NONE"


@dataclass(frozen=True)
class ControllerConfig:
    score_threshold: float = 0.10
    n_on: int = 3
    n_off: int = 5
    min_confidence: float = 0.25


@dataclass(frozen=True)
class CrossingState:
    mode: Mode = Mode.NORMAL
    bar: Bar = Bar.UP
    cms_active: bool = False
    train_signal: TrainSignalState = field(default_factory=TrainSignalState)
    tick: int = 0

    def __post_init__(self) -> None:
        consistent = {
            Mode.NORMAL: (Bar.UP, False),
            Mode.WARNING: (Bar.UP, True),
            Mode.LOWERED: (Bar.DOWN, False),
        }[self.mode]
        if (self.bar, self.cms_active) != consistent:
            raise ValueError(
                f"inconsistent state: mode={self.mode.value} bar={self.bar.value} "
                f"cms={self.cms_active}"
            )
        if self.tick < 0:
            raise ValueError(f"negative tick: {self.tick}")


@dataclass(frozen=True)
class TickInput:
    score_cam1: float
    score_cam2: float
    roi_detections: Sequence
    roi: BBox


@dataclass(frozen=True)
class ControlEvent:
    """One action plus the post-step state snapshot it produced."""

    tick: int
    action: Action
    mode: Mode
    bar: Bar
    cms_active: bool


INITIAL_STATE = CrossingState()


def roi_is_clear(dets: Sequence, roi: BBox, min_confidence: float = 0.25) -> bool:
    """True iff no confident non-train detection overlaps the crossing zone.

    The train class never blocks its own crossing.
    """
    return not any(
        d.confidence >= min_confidence
        and d.class_label != TRAIN_CLASS
        and overlaps_roi(d.box, roi)
        for d in dets
    )


def step(state: CrossingState, inp: TickInput,
         config: ControllerConfig) -> tuple[CrossingState, list[ControlEvent]]:
    """Advance the controller by one tick, returning the new state and events."""
    signal = update_train_signal(
        state.train_signal, inp.score_cam1, inp.score_cam2,
        config.score_threshold, config.n_on, config.n_off)
    near = signal.asserted
    clear = roi_is_clear(inp.roi_detections, inp.roi, config.min_confidence)

    actions: list[Action] = []
    if state.mode is Mode.NORMAL:
        if near and clear:
            mode = Mode.LOWERED
            actions = [Action.LOWER_BAR]
        elif near:
            mode = Mode.WARNING
            actions = [Action.BROADCAST_WARNING]
        else:
            mode = Mode.NORMAL
    elif state.mode is Mode.WARNING:
        if near and clear:
            mode = Mode.LOWERED
            actions = [Action.CLEAR_WARNING, Action.LOWER_BAR]
        elif near:
            mode = Mode.WARNING
        else:
            mode = Mode.NORMAL
            actions = [Action.CLEAR_WARNING]
    else:  # LOWERED
        if not near:
            mode = Mode.NORMAL
            actions = [Action.RAISE_BAR]
        elif not clear:
            mode = Mode.WARNING
            actions = [Action.RAISE_BAR, Action.BROADCAST_WARNING]
        else:
            mode = Mode.LOWERED

    new_state = CrossingState(
        mode=mode,
        bar=Bar.DOWN if mode is Mode.LOWERED else Bar.UP,
        cms_active=mode is Mode.WARNING,
        train_signal=signal,
        tick=state.tick + 1,
    )
    if not actions:
        actions = [Action.NONE]
    events = [
        ControlEvent(tick=state.tick, action=a, mode=mode,
                     bar=new_state.bar, cms_active=new_state.cms_active)
        for a in actions
    ]
    return new_state, events


def run_episode(inputs: Sequence[TickInput], config: ControllerConfig,
                initial: CrossingState = INITIAL_STATE,
                ) -> tuple[list[ControlEvent], CrossingState]:
    """Fold step over an ordered input sequence from the initial state."""
    state = initial
    events: list[ControlEvent] = []
    for inp in inputs:
        state, tick_events = step(state, inp, config)
        events.extend(tick_events)
    return events, state


def render_event(e: ControlEvent) -> str:
    return (f"tick={e.tick} mode={e.mode.value} bar={e.bar.value} "
            f"cms={int(e.cms_active)} action={e.action.value}")


def parse_event(line: str) -> ControlEvent:
    fields = dict(part.split("=", 1) for part in line.split())
    return ControlEvent(
        tick=int(fields["tick"]),
        action=Action(fields["action"]),
        mode=Mode(fields["mode"]),
        bar=Bar(fields["bar"]),
        cms_active=fields["cms"] == "1",
    )
