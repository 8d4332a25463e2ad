# --- cadrefine render prologue v1 ---
import os
import sys
import traceback

import FreeCAD as App
import FreeCADGui as Gui

Gui.showMainWindow()

_USER_SOURCE = @USER_SOURCE@

try:
    exec(compile(_USER_SOURCE, "macro.FCMacro", "exec"), {"__name__": "__main__", "App": App, "Gui": Gui})
except BaseException:
    traceback.print_exc(file=sys.stderr)
    sys.stderr.flush()
    os._exit(1)
# --- end prologue ---
