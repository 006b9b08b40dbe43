# Обработчики подкоманд CLI
