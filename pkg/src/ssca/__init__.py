"""Scattered-storage / clustered-allocation slotting for automated drug dispensing machines."""

from .model import (
    Assignment,
    CapacityError,
    DrugCatalog,
    DrugRecord,
    Grouping,
    IngestionError,
    Location,
    MachineLayout,
    OrderHistory,
    PickerModel,
    PrescriptionOrder,
    SlottingError,
    StockoutError,
    StockState,
)

__version__ = "0.1.0"
