"""
Ereigniswarteschlange: nach Zeit, bei Gleichstand nach Einfügereihenfolge
"""

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, List, Optional


class CausalityError(RuntimeError):
    pass


@dataclass(order=True)
class Event:
    time: int
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)
    # Zeitpunkt, zu dem die Eingangsdaten bereitstehen
    ready: int = field(compare=False, default=0)


class EventQueue:
    def __init__(self, check_causality: bool = False):
        self._heap: List[Event] = []
        self._seq = itertools.count()
        self.now = 0
        self.check_causality = check_causality
        self.processed = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: int, kind: str, payload: Any = None, ready: Optional[int] = None) -> Event:
        event = Event(time, next(self._seq), kind, payload, time if ready is None else ready)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        """
        Raises:
            CausalityError: Zeit läuft rückwärts oder Daten kommen aus der Zukunft
        """
        event = heapq.heappop(self._heap)
        if self.check_causality:
            if event.time < self.now:
                raise CausalityError(f"Ereignis {event.kind} bei {event.time} < jetzt {self.now}")
            if event.ready > event.time:
                raise CausalityError(
                    f"Ereignis {event.kind} bei {event.time} nutzt Daten von Zyklus {event.ready}")
        self.now = event.time
        self.processed += 1
        return event
