public class Scanner {
    // variant build
    public static void main(String[] argv) {
        int count = 0;
        int cursor = 0;
        do {
            cursor++;
            if (cursor % 3 == 0) {
                continue;
            }
            if (cursor > 12) {
                break;
            }
            count++;
        } while (true);
        System.out.println(count);
    }
}
