# --- cadrefine render epilogue v1 ---
_RENDER_PATH = @RENDER_PATH@
_doc = App.ActiveDocument
if _doc is None:
    sys.stderr.write("render capture failed: macro created no active document\n")
    sys.stderr.flush()
    os._exit(1)
try:
    _doc.recompute()
    _view = Gui.ActiveDocument.ActiveView
    _view.viewIsometric()
    _view.fitAll()
    _view.saveImage(_RENDER_PATH, 1024, 768, "White")
except BaseException:
    traceback.print_exc(file=sys.stderr)
    sys.stderr.flush()
    os._exit(1)
sys.stdout.flush()
os._exit(0)
# --- end epilogue ---
